use crate::fault::{FaultDescriptor, FaultId, FaultKind, FaultLocation};
use crate::netlist::{CombOp, NodeId, NodeKind, RtlGraph};
use crate::sched::SimError;
use crate::stimulus::Stimulus;

/// Output traces with and without one fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleFaultRun {
    pub good: Vec<Vec<u64>>,
    pub faulty: Vec<Vec<u64>>,
    /// First differing cycle and the lowest-index output that differs.
    pub detection: Option<(u32, String)>,
}

fn width_mask(width: u32) -> u128 {
    (1u128 << width) - 1
}

fn op_value(op: CombOp, width: u32, args: &[u64]) -> u64 {
    let m = width_mask(width);
    let a = args[0] as u128;
    let b = args.get(1).map_or(0, |&b| b as u128);
    let r: u128 = match op {
        CombOp::Not => !a,
        CombOp::And => a & b,
        CombOp::Or => a | b,
        CombOp::Xor => a ^ b,
        CombOp::Add => a + b,
        CombOp::Sub => a.wrapping_sub(b),
        CombOp::Mul => a * b,
        CombOp::Eq => u128::from(a == b),
        CombOp::Lt => u128::from(a < b),
        CombOp::Mux => {
            let pick = if a % 2 == 1 { 1 } else { 2 };
            args[pick] as u128
        }
        CombOp::Shl if b < 64 => a << b,
        CombOp::Shr if b < 64 => (a & m) >> b,
        CombOp::Shl | CombOp::Shr => 0,
        CombOp::Slice { hi, lo } => (a >> lo) & width_mask(hi - lo + 1),
        CombOp::Concat { low_width } => (a << low_width) | (b & width_mask(low_width)),
    };
    (r & m) as u64
}

/// Where the fault acts, resolved without modifying the graph.
fn site(graph: &RtlGraph, fault: &FaultDescriptor) -> Option<NodeId> {
    match &fault.location {
        FaultLocation::Wire(n) | FaultLocation::Reg(n) => Some(*n),
        FaultLocation::Port(name) => {
            let id = graph.lookup(name)?;
            match graph.node(id).kind {
                NodeKind::Output => Some(graph.node(id).fanin[0]),
                _ => Some(id),
            }
        }
    }
}

fn force(fault: Option<(&FaultDescriptor, NodeId)>, node: NodeId, value: u64, cycle: u32) -> u64 {
    let Some((f, at)) = fault else { return value };
    if at != node {
        return value;
    }
    let bit = 1u64 << f.bit;
    match f.kind {
        FaultKind::Sa0 => value & !bit,
        FaultKind::Sa1 => value | bit,
        FaultKind::Transient { start, end } if (start..=end).contains(&cycle) => value ^ bit,
        FaultKind::Transient { .. } => value,
    }
}

/// Plain cycle simulation; returns the output values of every cycle.
fn simulate(graph: &RtlGraph, rows: &[Vec<u64>], fault: Option<(&FaultDescriptor, NodeId)>) -> Vec<Vec<u64>> {
    let mut value = vec![0u64; graph.len()];
    for &r in &graph.regs {
        if let NodeKind::Reg { init } = graph.node(r).kind {
            value[r.index()] = force(fault, r, init, 0);
        }
    }
    let mut trace = Vec::with_capacity(rows.len());
    for (c, row) in rows.iter().enumerate() {
        let cycle = c as u32;
        for (&i, &v) in graph.inputs.iter().zip(row) {
            value[i.index()] = force(fault, i, v, cycle);
        }
        for &id in &graph.topo {
            let node = graph.node(id);
            let v = match node.kind {
                NodeKind::Const(k) => force(fault, id, k, cycle),
                NodeKind::Comb(op) => {
                    let args: Vec<u64> = node.fanin.iter().map(|f| value[f.index()]).collect();
                    force(fault, id, op_value(op, node.width, &args), cycle)
                }
                NodeKind::Output | NodeKind::Virtual => {
                    force(fault, id, value[node.fanin[0].index()] & width_mask(node.width) as u64, cycle)
                }
                NodeKind::Input | NodeKind::Reg { .. } => continue,
            };
            value[id.index()] = v;
        }
        trace.push(graph.outputs.iter().map(|o| value[o.index()]).collect());
        let loaded: Vec<u64> = graph
            .regs
            .iter()
            .map(|&r| {
                let n = graph.node(r);
                let raw = n.next_src.map_or(value[r.index()], |s| value[s.index()]) & width_mask(n.width) as u64;
                force(fault, r, raw, cycle + 1)
            })
            .collect();
        for (&r, v) in graph.regs.iter().zip(loaded) {
            value[r.index()] = v;
        }
    }
    trace
}

fn first_difference(graph: &RtlGraph, good: &[Vec<u64>], faulty: &[Vec<u64>]) -> Option<(u32, String)> {
    good.iter().zip(faulty).enumerate().find_map(|(c, (g, f))| {
        g.iter().zip(f).position(|(a, b)| a != b).map(|o| (c as u32, graph.node(graph.outputs[o]).name.clone()))
    })
}

/// Simulate `fault` alone by forcing its site every active cycle.
pub fn run_single_fault(graph: &RtlGraph, fault: &FaultDescriptor, stimulus: &Stimulus) -> Result<SingleFaultRun, SimError> {
    let rows = stimulus.bind(graph)?;
    let at = site(graph, fault).ok_or_else(|| SimError::Config(format!("fault {} has no site", fault.fid)))?;
    let good = simulate(graph, &rows, None);
    let faulty = simulate(graph, &rows, Some((fault, at)));
    let detection = first_difference(graph, &good, &faulty);
    Ok(SingleFaultRun { good, faulty, detection })
}

/// Fault id, detection cycle and first differing output.
pub type FaultVerdict = (FaultId, Option<u32>, Option<String>);

/// One independent run per fault.
pub fn single_fault_verdicts(
    graph: &RtlGraph,
    faults: &[FaultDescriptor],
    stimulus: &Stimulus,
) -> Result<Vec<FaultVerdict>, SimError> {
    let rows = stimulus.bind(graph)?;
    let good = simulate(graph, &rows, None);
    faults
        .iter()
        .map(|f| {
            let at = site(graph, f).ok_or_else(|| SimError::Config(format!("fault {} has no site", f.fid)))?;
            let faulty = simulate(graph, &rows, Some((f, at)));
            let det = first_difference(graph, &good, &faulty);
            Ok((f.fid, det.as_ref().map(|d| d.0), det.map(|d| d.1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::load_netlist;

    fn stim(inputs: &[&str], rows: Vec<Vec<u64>>) -> Stimulus {
        Stimulus { inputs: inputs.iter().map(|s| s.to_string()).collect(), rows }
    }

    fn fault(location: FaultLocation, bit: u32, kind: FaultKind) -> FaultDescriptor {
        FaultDescriptor { fid: FaultId(0), location, bit, kind }
    }

    #[test]
    fn and_controlling_value() {
        let g = load_netlist("input a 1\ninput b 1\nassign y 1 = AND a b\noutput o 1 = y").unwrap();
        let f = fault(FaultLocation::Port("a".into()), 0, FaultKind::Sa0);
        let r = run_single_fault(&g, &f, &stim(&["a", "b"], vec![vec![1, 1]])).unwrap();
        assert_eq!(r.detection, Some((0, "o".into())));
        let r = run_single_fault(&g, &f, &stim(&["a", "b"], vec![vec![1, 0]])).unwrap();
        assert_eq!(r.detection, None);
    }

    #[test]
    fn dead_logic_never_detected() {
        let g = load_netlist("input a 1\nassign dead 1 = NOT a\nassign y 1 = NOT a\noutput o 1 = y").unwrap();
        let f = fault(FaultLocation::Wire(g.lookup("dead").unwrap()), 0, FaultKind::Sa1);
        let rows = (0..4).map(|c| vec![c % 2]).collect();
        assert_eq!(run_single_fault(&g, &f, &stim(&["a"], rows)).unwrap().detection, None);
    }

    #[test]
    fn register_fault_forced_on_load() {
        let g = load_netlist("input a 2\nreg r 2 = 0\nnext r = a\noutput o 2 = r").unwrap();
        let f = fault(FaultLocation::Reg(g.lookup("r").unwrap()), 1, FaultKind::Transient { start: 2, end: 2 });
        let r = run_single_fault(&g, &f, &stim(&["a"], vec![vec![1]; 4])).unwrap();
        assert_eq!(r.good, vec![vec![0], vec![1], vec![1], vec![1]]);
        assert_eq!(r.faulty, vec![vec![0], vec![1], vec![3], vec![1]]);
        assert_eq!(r.detection, Some((2, "o".into())));
    }

    #[test]
    fn lowest_index_output_reported() {
        let g = load_netlist("input a 1\nassign y 1 = NOT a\noutput p 1 = a\noutput q 1 = y").unwrap();
        let f = fault(FaultLocation::Port("a".into()), 0, FaultKind::Sa1);
        let r = run_single_fault(&g, &f, &stim(&["a"], vec![vec![0]])).unwrap();
        assert_eq!(r.detection, Some((0, "p".into())));
    }

    #[test]
    fn wide_arithmetic_wraps() {
        assert_eq!(op_value(CombOp::Add, 8, &[0xff, 1]), 0);
        assert_eq!(op_value(CombOp::Add, 64, &[u64::MAX, 1]), 0);
        assert_eq!(op_value(CombOp::Mul, 64, &[u64::MAX, u64::MAX]), 1);
        assert_eq!(op_value(CombOp::Sub, 4, &[0, 1]), 0xf);
        assert_eq!(op_value(CombOp::Mux, 4, &[1, 0xa, 0xb]), 0xa);
        assert_eq!(op_value(CombOp::Shl, 8, &[1, 70]), 0);
        assert_eq!(op_value(CombOp::Concat { low_width: 4 }, 8, &[0x3, 0x5]), 0x35);
    }
}
