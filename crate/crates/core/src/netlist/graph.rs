use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{mask, DeclKind, ElabError, NetlistDecl, NodeId, OpCode, Operand};

/// Operator with its width-dependent parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombOp {
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Mux,
    Shl,
    Shr,
    Slice { hi: u32, lo: u32 },
    Concat { low_width: u32 },
}

impl CombOp {
    pub fn arity(self) -> usize {
        self.opcode().arity()
    }

    pub fn opcode(self) -> OpCode {
        match self {
            CombOp::Not => OpCode::Not,
            CombOp::And => OpCode::And,
            CombOp::Or => OpCode::Or,
            CombOp::Xor => OpCode::Xor,
            CombOp::Add => OpCode::Add,
            CombOp::Sub => OpCode::Sub,
            CombOp::Mul => OpCode::Mul,
            CombOp::Eq => OpCode::Eq,
            CombOp::Lt => OpCode::Lt,
            CombOp::Mux => OpCode::Mux,
            CombOp::Shl => OpCode::Shl,
            CombOp::Shr => OpCode::Shr,
            CombOp::Slice { hi, lo } => OpCode::Slice { hi, lo },
            CombOp::Concat { .. } => OpCode::Concat,
        }
    }

    /// Evaluate at result `width`. Operands are masked to their own widths
    /// already; wider operands are truncated and narrower ones implicitly
    /// zero-extended. Shift amounts and comparisons use full operand values.
    #[inline]
    pub fn apply(self, width: u32, args: &[u64]) -> u64 {
        let m = mask(width);
        let v = match self {
            CombOp::Not => !args[0],
            CombOp::And => args[0] & args[1],
            CombOp::Or => args[0] | args[1],
            CombOp::Xor => args[0] ^ args[1],
            CombOp::Add => args[0].wrapping_add(args[1]),
            CombOp::Sub => args[0].wrapping_sub(args[1]),
            CombOp::Mul => args[0].wrapping_mul(args[1]),
            CombOp::Eq => (args[0] == args[1]) as u64,
            CombOp::Lt => (args[0] < args[1]) as u64,
            CombOp::Mux => {
                if args[0] & 1 != 0 {
                    args[1]
                } else {
                    args[2]
                }
            }
            CombOp::Shl => {
                if args[1] >= 64 {
                    0
                } else {
                    args[0] << args[1]
                }
            }
            CombOp::Shr => {
                if args[1] >= 64 {
                    0
                } else {
                    (args[0] & m) >> args[1]
                }
            }
            CombOp::Slice { lo, .. } => args[0] >> lo,
            CombOp::Concat { low_width } => (args[0] << low_width) | args[1],
        };
        v & m
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Input,
    Const(u64),
    Comb(CombOp),
    Reg { init: u64 },
    Output,
    /// Pass-through carrier spliced in front of a port for port faults.
    Virtual,
}

impl NodeKind {
    /// Nodes whose value is produced by evaluation within a cycle.
    pub fn is_evaluated(&self) -> bool {
        matches!(self, NodeKind::Comb(_) | NodeKind::Output | NodeKind::Virtual)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtlNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub width: u32,
    pub fanin: Vec<NodeId>,
    pub fanout: Vec<NodeId>,
    /// Source of the end-of-cycle update (registers only).
    pub next_src: Option<NodeId>,
}

/// Elaborated circuit. Registers are sources of the combinational view; their
/// `next_src` edges are not part of it.
#[derive(Debug, Clone)]
pub struct RtlGraph {
    pub name: Option<String>,
    pub nodes: Vec<RtlNode>,
    pub topo: Vec<NodeId>,
    pub inputs: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
    pub regs: Vec<NodeId>,
    by_name: HashMap<String, NodeId>,
    virtuals: HashMap<NodeId, NodeId>,
}

impl RtlGraph {
    #[inline]
    pub fn node(&self, id: NodeId) -> &RtlNode {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    /// The virtual carrier spliced in front of `port`, if any.
    pub fn virtual_for(&self, port: NodeId) -> Option<NodeId> {
        self.virtuals.get(&port).copied()
    }

    /// Insert (or reuse) a virtual pass-through node between `target` and all
    /// of its consumers, including registers that load from it.
    pub fn splice_virtual(&mut self, target: NodeId) -> NodeId {
        if let Some(v) = self.virtual_for(target) {
            return v;
        }
        let id = NodeId(self.nodes.len() as u32);
        let consumers = std::mem::replace(&mut self.nodes[target.index()].fanout, vec![id]);
        for &c in &consumers {
            for f in &mut self.nodes[c.index()].fanin {
                if *f == target {
                    *f = id;
                }
            }
        }
        for r in self.regs.clone() {
            if self.nodes[r.index()].next_src == Some(target) {
                self.nodes[r.index()].next_src = Some(id);
            }
        }
        let t = &self.nodes[target.index()];
        let node = RtlNode {
            id,
            name: format!("{}$port", t.name),
            kind: NodeKind::Virtual,
            width: t.width,
            fanin: vec![target],
            fanout: consumers,
            next_src: None,
        };
        self.nodes.push(node);
        self.virtuals.insert(target, id);
        self.topo = compute_topo(&self.nodes).expect("virtual splice keeps the graph acyclic");
        id
    }

    /// Nodes that read `id` through a combinational fanin edge.
    pub fn readers(&self, id: NodeId) -> &[NodeId] {
        &self.node(id).fanout
    }
}

/// Resolve names, check widths and order the combinational view.
pub fn elaborate(decls: &[NetlistDecl]) -> Result<RtlGraph, ElabError> {
    elaborate_named(None, decls)
}

pub(crate) fn elaborate_named(
    name: Option<String>,
    decls: &[NetlistDecl],
) -> Result<RtlGraph, ElabError> {
    let mut nodes: Vec<RtlNode> = Vec::new();
    let mut by_name = HashMap::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut regs = Vec::new();

    for d in decls {
        let kind = match &d.kind {
            DeclKind::Input => NodeKind::Input,
            DeclKind::Output { .. } => NodeKind::Output,
            DeclKind::Reg { init } => NodeKind::Reg { init: *init },
            // placeholder; resolved below once operand widths are known
            DeclKind::Assign { .. } => NodeKind::Comb(CombOp::Not),
            DeclKind::Next { .. } => continue,
        };
        let id = NodeId(nodes.len() as u32);
        match kind {
            NodeKind::Input => inputs.push(id),
            NodeKind::Output => outputs.push(id),
            NodeKind::Reg { .. } => regs.push(id),
            _ => {}
        }
        by_name.insert(d.name.clone(), id);
        nodes.push(RtlNode {
            id,
            name: d.name.clone(),
            kind,
            width: d.width,
            fanin: Vec::new(),
            fanout: Vec::new(),
            next_src: None,
        });
    }

    let mut consts: HashMap<(u64, u32), NodeId> = HashMap::new();
    let mut resolve = |nodes: &mut Vec<RtlNode>, op: &Operand, line: usize| -> Result<NodeId, ElabError> {
        match op {
            Operand::Name(n) => by_name
                .get(n)
                .copied()
                .ok_or_else(|| ElabError::Undeclared { line, name: n.clone() }),
            Operand::Literal { value, width } => Ok(*consts.entry((*value, *width)).or_insert_with(|| {
                let id = NodeId(nodes.len() as u32);
                nodes.push(RtlNode {
                    id,
                    name: format!("#{value:x}:{width}"),
                    kind: NodeKind::Const(*value),
                    width: *width,
                    fanin: Vec::new(),
                    fanout: Vec::new(),
                    next_src: None,
                });
                id
            })),
        }
    };

    for d in decls {
        match &d.kind {
            DeclKind::Input | DeclKind::Reg { .. } => {}
            DeclKind::Output { source } => {
                let src = resolve(&mut nodes, source, d.line)?;
                let id = by_name[&d.name];
                nodes[id.index()].fanin = vec![src];
            }
            DeclKind::Assign { op, operands } => {
                let mut fanin = Vec::with_capacity(operands.len());
                for o in operands {
                    fanin.push(resolve(&mut nodes, o, d.line)?);
                }
                let widths: Vec<u32> = fanin.iter().map(|f| nodes[f.index()].width).collect();
                let comb = resolve_op(*op, d, &widths)?;
                let id = by_name[&d.name];
                let n = &mut nodes[id.index()];
                n.kind = NodeKind::Comb(comb);
                n.fanin = fanin;
            }
            DeclKind::Next { source } => {
                let target = by_name
                    .get(&d.name)
                    .copied()
                    .ok_or_else(|| ElabError::Undeclared { line: d.line, name: d.name.clone() })?;
                if !matches!(nodes[target.index()].kind, NodeKind::Reg { .. }) {
                    return Err(ElabError::NextTarget { line: d.line, name: d.name.clone() });
                }
                let src = resolve(&mut nodes, source, d.line)?;
                nodes[target.index()].next_src = Some(src);
            }
        }
    }

    for &r in &regs {
        if nodes[r.index()].next_src.is_none() {
            return Err(ElabError::MissingNext { name: nodes[r.index()].name.clone() });
        }
    }

    for i in 0..nodes.len() {
        let fanin = nodes[i].fanin.clone();
        for f in fanin {
            let out = &mut nodes[f.index()].fanout;
            let me = NodeId(i as u32);
            if !out.contains(&me) {
                out.push(me);
            }
        }
    }

    let topo = compute_topo(&nodes).map_err(|cycle| ElabError::CombCycle {
        names: cycle.iter().map(|id| nodes[id.index()].name.clone()).collect(),
    })?;

    Ok(RtlGraph { name, nodes, topo, inputs, outputs, regs, by_name, virtuals: HashMap::new() })
}

fn resolve_op(op: OpCode, d: &NetlistDecl, widths: &[u32]) -> Result<CombOp, ElabError> {
    let width_err = |msg: String| ElabError::Width { line: d.line, name: d.name.clone(), msg };
    Ok(match op {
        OpCode::Not => CombOp::Not,
        OpCode::And => CombOp::And,
        OpCode::Or => CombOp::Or,
        OpCode::Xor => CombOp::Xor,
        OpCode::Add => CombOp::Add,
        OpCode::Sub => CombOp::Sub,
        OpCode::Mul => CombOp::Mul,
        OpCode::Eq => CombOp::Eq,
        OpCode::Lt => CombOp::Lt,
        OpCode::Shl => CombOp::Shl,
        OpCode::Shr => CombOp::Shr,
        OpCode::Mux => {
            if widths[0] != 1 {
                return Err(width_err(format!("MUX select must be 1 bit, got {}", widths[0])));
            }
            CombOp::Mux
        }
        OpCode::Slice { hi, lo } => {
            if lo > hi || hi >= widths[0] {
                return Err(width_err(format!(
                    "SLICE {hi} {lo} out of range for {}-bit operand",
                    widths[0]
                )));
            }
            if d.width != hi - lo + 1 {
                return Err(width_err(format!("SLICE {hi} {lo} yields {} bits", hi - lo + 1)));
            }
            CombOp::Slice { hi, lo }
        }
        OpCode::Concat => {
            if widths[0] + widths[1] != d.width {
                return Err(width_err(format!(
                    "CONCAT of {} and {} bits must be {} bits wide",
                    widths[0],
                    widths[1],
                    widths[0] + widths[1]
                )));
            }
            CombOp::Concat { low_width: widths[1] }
        }
    })
}

/// Kahn's algorithm over the combinational view with ascending-id tie
/// breaking. On failure, returns the nodes of one combinational cycle.
pub(crate) fn compute_topo(nodes: &[RtlNode]) -> Result<Vec<NodeId>, Vec<NodeId>> {
    let n = nodes.len();
    let mut indeg = vec![0usize; n];
    for node in nodes {
        if node.kind.is_evaluated() {
            indeg[node.id.index()] = node.fanin.len();
        }
    }
    let mut ready: BinaryHeap<Reverse<u32>> =
        (0..n).filter(|&i| indeg[i] == 0).map(|i| Reverse(i as u32)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(NodeId(i));
        for &c in &nodes[i as usize].fanout {
            let c = c.index();
            if !nodes[c].kind.is_evaluated() {
                continue;
            }
            // duplicate fanins count once per occurrence
            let occurrences = nodes[c].fanin.iter().filter(|f| f.0 == i).count();
            indeg[c] -= occurrences;
            if indeg[c] == 0 {
                ready.push(Reverse(c as u32));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    Err(find_cycle(nodes, &indeg))
}

fn find_cycle(nodes: &[RtlNode], indeg: &[usize]) -> Vec<NodeId> {
    // Every node left with indeg > 0 has a fanin that is also stuck, so
    // walking backwards must revisit a node.
    let start = (0..nodes.len()).find(|&i| indeg[i] > 0).expect("cycle exists");
    let mut seen = vec![usize::MAX; nodes.len()];
    let mut path = Vec::new();
    let mut cur = start;
    while seen[cur] == usize::MAX {
        seen[cur] = path.len();
        path.push(NodeId(cur as u32));
        cur = nodes[cur]
            .fanin
            .iter()
            .map(|f| f.index())
            .find(|&f| indeg[f] > 0 && nodes[f].kind.is_evaluated())
            .expect("stuck node has a stuck fanin");
    }
    let mut cycle = path.split_off(seen[cur]);
    cycle.reverse();
    cycle
}

/// Position of every node in [`RtlGraph::topo`].
pub fn topo_positions(graph: &RtlGraph) -> Vec<usize> {
    let mut pos = vec![0; graph.nodes.len()];
    for (i, id) in graph.topo.iter().enumerate() {
        pos[id.index()] = i;
    }
    pos
}
