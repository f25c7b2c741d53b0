//! Reference simulators used as ground truth.
//!
//! [`run_serial_concurrent`] applies the production kernels to every node in
//! topological order on one thread, with no task graph and no skipping.
//! [`run_single_fault`] is a separate plain evaluator that simulates one
//! fault by forcing its site; it shares no evaluation code with the engine.

mod single;

pub use single::{run_single_fault, single_fault_verdicts, FaultVerdict, SingleFaultRun};

use crate::fault::{inject, FaultDescriptor};
use crate::netlist::NodeKind;
use crate::report::{FaultRecord, SimulationReport, Verdict};
use crate::sched::SimError;
use crate::sim::{evaluate, initial_register, sync_register, NodeState};
use crate::stimulus::Stimulus;
use crate::netlist::RtlGraph;

pub fn run_serial_concurrent(
    graph: &RtlGraph,
    faults: &[FaultDescriptor],
    stimulus: &Stimulus,
) -> Result<SimulationReport, SimError> {
    let rows = stimulus.bind(graph)?;
    let mut g = graph.clone();
    let table = inject(&mut g, faults)?;
    let mut states: Vec<NodeState> = g
        .nodes
        .iter()
        .map(|n| match n.kind {
            NodeKind::Const(v) => NodeState::with_good(v),
            NodeKind::Reg { .. } => initial_register(n, table.at(n.id)),
            _ => NodeState::default(),
        })
        .collect();
    let pos: std::collections::HashMap<_, _> = faults.iter().enumerate().map(|(i, f)| (f.fid, i)).collect();
    let mut detect: Vec<Option<(u32, String)>> = vec![None; faults.len()];
    for (c, row) in rows.iter().enumerate() {
        let cycle = c as u32;
        for (&id, &v) in g.inputs.iter().zip(row) {
            states[id.index()].good = v;
        }
        for &id in &g.topo {
            let node = g.node(id);
            if !node.kind.is_evaluated() {
                continue;
            }
            let fanins: Vec<&NodeState> = node.fanin.iter().map(|f| &states[f.index()]).collect();
            let d = evaluate(node, &fanins, &states[id.index()], table.at(id), cycle);
            let s = &mut states[id.index()];
            s.good_changed = d.new_good != s.good;
            s.bads_changed = d.new_bads != s.bads;
            s.good = d.new_good;
            s.bads = d.new_bads;
        }
        for &o in &g.outputs {
            for b in &states[o.index()].bads {
                let p = pos[&b.fid];
                if detect[p].is_none() {
                    detect[p] = Some((cycle, g.node(o).name.clone()));
                }
            }
        }
        let next: Vec<NodeState> = g
            .regs
            .iter()
            .map(|&r| {
                let node = g.node(r);
                let src = node.next_src.unwrap_or(r);
                sync_register(node, &states[r.index()], &states[src.index()], table.at(r), cycle + 1)
            })
            .collect();
        for (&r, s) in g.regs.iter().zip(next) {
            states[r.index()] = s;
        }
    }
    let records = faults
        .iter()
        .zip(detect)
        .map(|(f, d)| FaultRecord {
            fid: f.fid,
            location_kind: f.location.kind_str().to_string(),
            location_name: f.location.name(&g).to_string(),
            bit: f.bit,
            fault_kind: f.kind,
            verdict: if d.is_some() { Verdict::Detected } else { Verdict::Undetected },
            detect_cycle: d.as_ref().map(|d| d.0),
            observing_output: d.map(|d| d.1),
        })
        .collect();
    let mut config = std::collections::BTreeMap::new();
    config.insert("mode".to_string(), "oracle".to_string());
    Ok(SimulationReport { records, cycles: rows.len() as u32, config, ..Default::default() })
}
