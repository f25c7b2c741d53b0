//! Executable task graph: one compute task per evaluated node, register
//! synchronization tasks, and master/slave expansion of heavy nodes.

mod board;
mod dot;

pub use board::{publish_ranges, RangeBoard};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::netlist::{NodeId, NodeKind, RtlGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u32);

impl TaskId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskKind {
    Default(NodeId),
    Master(NodeId),
    Slave { node: NodeId, index: u32 },
    /// Registers updated together; all are read before any is written.
    LocalSync(Vec<NodeId>),
}

/// Execution phase. Barrier-style synchronization runs sync tasks only after
/// every compute task of the cycle has finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Compute,
    Sync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Sync tasks wait only on the tasks that feed or read their registers.
    Local,
    /// Sync tasks run after a whole-graph barrier.
    Global,
}

/// How registers are grouped into sync tasks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SyncGrouping {
    #[default]
    PerReg,
    /// Consecutive registers (declaration order) in groups of `n`.
    Chunks(usize),
    /// Explicit groups by register name; unlisted registers get their own task.
    Partition(Vec<Vec<String>>),
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    pub phase: Phase,
    pub preds: Vec<TaskId>,
    pub succ: Vec<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskGraphError {
    #[error("node `{0}` is already expanded")]
    AlreadyExpanded(String),
    #[error("node `{0}` has no compute task")]
    NotExpandable(String),
    #[error("slave count must be at least 1")]
    ZeroSlaves,
    #[error("sync tasks already inserted")]
    SyncPresent,
    #[error("bad sync grouping: {0}")]
    BadGrouping(String),
    #[error("previous cycle incomplete: {}", pending.iter().map(|(t, c)| format!("{t} (pred_count {c})")).collect::<Vec<_>>().join(", "))]
    Incomplete { pending: Vec<(TaskId, u32)> },
}

#[derive(Debug)]
pub struct TaskGraph {
    tasks: Vec<Task>,
    pred_count: Vec<AtomicU32>,
    runs: Vec<AtomicU32>,
    node_task: Vec<Option<TaskId>>,
    slaves: Vec<Vec<TaskId>>,
    sync_task: Vec<Option<TaskId>>,
    boards: Vec<Option<Box<RangeBoard>>>,
    sync_mode: Option<SyncMode>,
    slave_count: usize,
    armed: bool,
}

/// One compute task per evaluated node. Inputs, constants and registers
/// are state sources and get no task.
pub fn build_task_graph(graph: &RtlGraph) -> TaskGraph {
    let n = graph.len();
    let mut tg = TaskGraph {
        tasks: Vec::new(),
        pred_count: Vec::new(),
        runs: Vec::new(),
        node_task: vec![None; n],
        slaves: vec![Vec::new(); n],
        sync_task: vec![None; n],
        boards: (0..n).map(|_| None).collect(),
        sync_mode: None,
        slave_count: 0,
        armed: false,
    };
    for &id in &graph.topo {
        if graph.node(id).kind.is_evaluated() {
            let t = tg.push(TaskKind::Default(id), Phase::Compute);
            tg.node_task[id.index()] = Some(t);
        }
    }
    for &id in &graph.topo {
        let Some(t) = tg.node_task[id.index()] else { continue };
        for &f in &graph.node(id).fanin {
            if let Some(p) = tg.node_task[f.index()] {
                tg.add_edge(p, t);
            }
        }
    }
    tg
}

impl TaskGraph {
    fn push(&mut self, kind: TaskKind, phase: Phase) -> TaskId {
        let id = TaskId(self.tasks.len() as u32);
        self.tasks.push(Task { id, kind, phase, preds: Vec::new(), succ: Vec::new() });
        self.pred_count.push(AtomicU32::new(0));
        self.runs.push(AtomicU32::new(0));
        id
    }

    fn add_edge(&mut self, from: TaskId, to: TaskId) {
        if from == to || self.tasks[to.index()].preds.contains(&from) {
            return;
        }
        self.tasks[to.index()].preds.push(from);
        self.tasks[from.index()].succ.push(to);
    }

    /// Tasks whose completion means `node`'s state is final for the cycle.
    fn completion(&self, node: NodeId) -> Vec<TaskId> {
        let mut out: Vec<TaskId> = self.node_task[node.index()].into_iter().collect();
        out.extend_from_slice(&self.slaves[node.index()]);
        out
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    #[inline]
    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.index()]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Default or Master task of `node`.
    pub fn task_of(&self, node: NodeId) -> Option<TaskId> {
        self.node_task.get(node.index()).copied().flatten()
    }

    pub fn slaves_of(&self, node: NodeId) -> &[TaskId] {
        &self.slaves[node.index()]
    }

    pub fn sync_task_of(&self, reg: NodeId) -> Option<TaskId> {
        self.sync_task.get(reg.index()).copied().flatten()
    }

    pub fn sync_mode(&self) -> Option<SyncMode> {
        self.sync_mode
    }

    pub fn slave_count(&self) -> usize {
        self.slave_count
    }

    pub fn is_expanded(&self, node: NodeId) -> bool {
        !self.slaves[node.index()].is_empty()
    }

    pub fn expanded_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slaves.iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(i, _)| NodeId(i as u32))
    }

    #[inline]
    pub fn board(&self, node: NodeId) -> Option<&RangeBoard> {
        self.boards[node.index()].as_deref()
    }

    /// Add one sync task per register group. Local mode wires each task after
    /// the producers of its next values and every reader of its registers;
    /// global mode leaves them for the barrier phase.
    pub fn insert_sync(&mut self, graph: &RtlGraph, mode: SyncMode, grouping: &SyncGrouping) -> Result<(), TaskGraphError> {
        if self.sync_mode.is_some() {
            return Err(TaskGraphError::SyncPresent);
        }
        self.disarm()?;
        let groups = self.sync_groups(graph, grouping)?;
        let phase = match mode {
            SyncMode::Local => Phase::Compute,
            SyncMode::Global => Phase::Sync,
        };
        let mut group_task = Vec::with_capacity(groups.len());
        for g in &groups {
            let t = self.push(TaskKind::LocalSync(g.clone()), phase);
            for &r in g {
                self.sync_task[r.index()] = Some(t);
            }
            group_task.push(t);
        }
        for (g, &t) in groups.iter().zip(&group_task) {
            for &r in g {
                let node = graph.node(r);
                if mode == SyncMode::Local {
                    if let Some(src) = node.next_src {
                        for p in self.completion(src) {
                            self.add_edge(p, t);
                        }
                    }
                    for &reader in graph.readers(r) {
                        for p in self.completion(reader) {
                            self.add_edge(p, t);
                        }
                    }
                }
                // a sync that loads another register must read it before
                // that register's own sync overwrites it
                if let Some(src) = node.next_src {
                    if let Some(w) = self.sync_task[src.index()] {
                        self.add_edge(t, w);
                    }
                }
            }
        }
        self.sync_mode = Some(mode);
        Ok(())
    }

    /// Local synchronization with the given grouping.
    pub fn insert_local_sync(mut self, graph: &RtlGraph, grouping: &SyncGrouping) -> Result<Self, TaskGraphError> {
        self.insert_sync(graph, SyncMode::Local, grouping)?;
        Ok(self)
    }

    /// Barrier-style synchronization with the given grouping.
    pub fn insert_global_sync(mut self, graph: &RtlGraph, grouping: &SyncGrouping) -> Result<Self, TaskGraphError> {
        self.insert_sync(graph, SyncMode::Global, grouping)?;
        Ok(self)
    }

    /// Groups after merging any that load each other's registers cyclically.
    fn sync_groups(&self, graph: &RtlGraph, grouping: &SyncGrouping) -> Result<Vec<Vec<NodeId>>, TaskGraphError> {
        let regs = &graph.regs;
        let mut group_of: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut base: Vec<Vec<NodeId>> = Vec::new();
        match grouping {
            SyncGrouping::PerReg => base.extend(regs.iter().map(|&r| vec![r])),
            SyncGrouping::Chunks(0) => return Err(TaskGraphError::BadGrouping("chunk size 0".into())),
            SyncGrouping::Chunks(n) => base.extend(regs.chunks(*n).map(<[NodeId]>::to_vec)),
            SyncGrouping::Partition(parts) => {
                let mut seen = BTreeMap::new();
                for part in parts {
                    let mut g = Vec::new();
                    for name in part {
                        let id = graph
                            .lookup(name)
                            .filter(|&id| matches!(graph.node(id).kind, NodeKind::Reg { .. }))
                            .ok_or_else(|| TaskGraphError::BadGrouping(format!("`{name}` is not a register")))?;
                        if seen.insert(id, ()).is_some() {
                            return Err(TaskGraphError::BadGrouping(format!("`{name}` listed twice")));
                        }
                        g.push(id);
                    }
                    if !g.is_empty() {
                        base.push(g);
                    }
                }
                base.extend(regs.iter().filter(|r| !seen.contains_key(r)).map(|&r| vec![r]));
            }
        }
        for (i, g) in base.iter().enumerate() {
            for &r in g {
                group_of.insert(r, i);
            }
        }
        let mut dg: DiGraph<usize, ()> = DiGraph::new();
        let ix: Vec<_> = (0..base.len()).map(|i| dg.add_node(i)).collect();
        for (i, g) in base.iter().enumerate() {
            for &r in g {
                if let Some(&j) = graph.node(r).next_src.and_then(|s| group_of.get(&s)) {
                    if i != j {
                        dg.add_edge(ix[i], ix[j], ());
                    }
                }
            }
        }
        let mut merged: Vec<Vec<NodeId>> = tarjan_scc(&dg)
            .into_iter()
            .map(|comp| {
                let mut regs: Vec<NodeId> = comp.iter().flat_map(|&n| base[dg[n]].iter().copied()).collect();
                regs.sort();
                regs
            })
            .collect();
        merged.sort();
        Ok(merged)
    }

    /// Replace `node`'s Default task with a Master plus `k` Slaves; the
    /// node's successors then wait on all of them.
    pub fn expand_high_load(&mut self, node: NodeId, k: usize, graph: &RtlGraph) -> Result<(), TaskGraphError> {
        let name = || graph.node(node).name.clone();
        if k == 0 {
            return Err(TaskGraphError::ZeroSlaves);
        }
        let t = self.task_of(node).ok_or_else(|| TaskGraphError::NotExpandable(name()))?;
        if self.is_expanded(node) {
            return Err(TaskGraphError::AlreadyExpanded(name()));
        }
        self.disarm()?;
        self.tasks[t.index()].kind = TaskKind::Master(node);
        let phase = self.tasks[t.index()].phase;
        let old_succ = std::mem::take(&mut self.tasks[t.index()].succ);
        let mut slaves = Vec::with_capacity(k);
        for index in 0..k {
            let s = self.push(TaskKind::Slave { node, index: index as u32 }, phase);
            self.tasks[s.index()].preds.push(t);
            self.tasks[s.index()].succ = old_succ.clone();
            slaves.push(s);
        }
        for &s in &old_succ {
            self.tasks[s.index()].preds.extend_from_slice(&slaves);
        }
        let master = &mut self.tasks[t.index()];
        master.succ = slaves.clone();
        master.succ.extend(old_succ);
        self.slaves[node.index()] = slaves;
        self.boards[node.index()] = Some(Box::new(RangeBoard::new(k)));
        self.slave_count = self.slave_count.max(k);
        Ok(())
    }

    /// Restore pred counts for a new cycle. Returns the entry tasks of each
    /// phase (the second list is empty unless synchronization is global).
    pub fn reset_for_cycle(&mut self) -> Result<[Vec<TaskId>; 2], TaskGraphError> {
        if self.armed {
            self.check_drained()?;
        }
        let mut ready = [Vec::new(), Vec::new()];
        for t in &self.tasks {
            let count = t.preds.iter().filter(|p| self.tasks[p.index()].phase == t.phase).count() as u32;
            self.pred_count[t.id.index()].store(count, Ordering::Relaxed);
            self.runs[t.id.index()].store(0, Ordering::Relaxed);
            if count == 0 {
                ready[t.phase as usize].push(t.id);
            }
        }
        self.armed = true;
        Ok(ready)
    }

    /// Structural edits happen only between fully drained cycles.
    fn disarm(&mut self) -> Result<(), TaskGraphError> {
        if self.armed {
            self.check_drained()?;
            self.armed = false;
        }
        Ok(())
    }

    /// Every task of the armed cycle ran exactly once.
    pub fn check_drained(&self) -> Result<(), TaskGraphError> {
        let pending: Vec<(TaskId, u32)> = self
            .tasks
            .iter()
            .filter(|t| self.runs[t.id.index()].load(Ordering::Acquire) != 1)
            .map(|t| (t.id, self.pred_count[t.id.index()].load(Ordering::Acquire)))
            .collect();
        if pending.is_empty() {
            Ok(())
        } else {
            Err(TaskGraphError::Incomplete { pending })
        }
    }

    /// Unexecuted tasks with their remaining pred counts.
    pub fn pending(&self) -> Vec<(TaskId, u32)> {
        self.tasks
            .iter()
            .filter(|t| self.runs[t.id.index()].load(Ordering::Acquire) == 0)
            .map(|t| (t.id, self.pred_count[t.id.index()].load(Ordering::Acquire)))
            .collect()
    }

    /// Record one execution of `t`; returns the run count after this one.
    #[inline]
    pub(crate) fn mark_run(&self, t: TaskId) -> u32 {
        self.runs[t.index()].fetch_add(1, Ordering::AcqRel) + 1
    }

    pub fn run_count(&self, t: TaskId) -> u32 {
        self.runs[t.index()].load(Ordering::Acquire)
    }

    /// Release one dependency of `t`; true when it just became ready.
    #[inline]
    pub(crate) fn release(&self, t: TaskId) -> bool {
        self.pred_count[t.index()].fetch_sub(1, Ordering::AcqRel) == 1
    }

    /// Successors of `t` in the same phase.
    pub(crate) fn phase_succ(&self, t: TaskId) -> impl Iterator<Item = TaskId> + '_ {
        let phase = self.tasks[t.index()].phase;
        self.tasks[t.index()].succ.iter().copied().filter(move |s| self.tasks[s.index()].phase == phase)
    }

    pub fn label(&self, t: TaskId, graph: &RtlGraph) -> String {
        let name = |n: NodeId| graph.node(n).name.as_str();
        match &self.tasks[t.index()].kind {
            TaskKind::Default(n) => format!("default:{}", name(*n)),
            TaskKind::Master(n) => format!("master:{}", name(*n)),
            TaskKind::Slave { node, index } => format!("slave:{}:{index}", name(*node)),
            TaskKind::LocalSync(regs) => {
                format!("sync:{}", regs.iter().map(|&r| name(r)).collect::<Vec<_>>().join(","))
            }
        }
    }

    /// Whether `a` transitively precedes `b` through same-phase edges or a
    /// phase barrier.
    pub fn precedes(&self, a: TaskId, b: TaskId) -> bool {
        let (pa, pb) = (self.tasks[a.index()].phase, self.tasks[b.index()].phase);
        if pa < pb {
            return true;
        }
        let mut seen = vec![false; self.tasks.len()];
        let mut stack = vec![a];
        while let Some(t) = stack.pop() {
            for &s in &self.tasks[t.index()].succ {
                if s == b {
                    return true;
                }
                if !seen[s.index()] {
                    seen[s.index()] = true;
                    stack.push(s);
                }
            }
        }
        false
    }

    /// Labelled edge set, independent of task numbering.
    pub fn canonical_edges(&self, graph: &RtlGraph) -> std::collections::BTreeSet<(String, String)> {
        self.tasks
            .iter()
            .flat_map(|t| t.succ.iter().map(move |&s| (t.id, s)))
            .map(|(a, b)| (self.label(a, graph), self.label(b, graph)))
            .collect()
    }

    /// Topological order over all tasks, compute phase first, lowest id
    /// first among ready tasks.
    pub fn topo_order(&self) -> Vec<TaskId> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut indeg: Vec<usize> = self.tasks.iter().map(|t| t.preds.len()).collect();
        let mut heap: BinaryHeap<Reverse<(Phase, TaskId)>> =
            self.tasks.iter().filter(|t| t.preds.is_empty()).map(|t| Reverse((t.phase, t.id))).collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(Reverse((_, t))) = heap.pop() {
            order.push(t);
            for &s in &self.tasks[t.index()].succ {
                indeg[s.index()] -= 1;
                if indeg[s.index()] == 0 {
                    heap.push(Reverse((self.tasks[s.index()].phase, s)));
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests;
