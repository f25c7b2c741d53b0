#![allow(dead_code)]

use rtl_fsim::bench::{gen_bench_with, Bench, BenchOptions, Profile};
use rtl_fsim::fault::FaultKind;
use rtl_fsim::netlist::RtlGraph;
use rtl_fsim::oracle::run_single_fault;
use rtl_fsim::sched::{run_simulation_observed, SimConfig};
use rtl_fsim::sim::NodeState;

/// Small circuit with a mix of permanent and transient faults.
pub fn fuzz_case(profile: Profile, size: usize, seed: u64, faults: usize, cycles: usize) -> Bench {
    let kinds = vec![
        FaultKind::Sa0,
        FaultKind::Sa1,
        FaultKind::Transient { start: 1, end: 2 },
        FaultKind::Transient { start: (cycles as u32) / 2, end: (cycles as u32) / 2 },
    ];
    let opts = BenchOptions { cycles, kinds, max_faults: Some(faults), ..Default::default() };
    gen_bench_with(profile, size, seed, &opts).expect("fuzz size is valid")
}

pub fn profile(i: usize) -> Profile {
    Profile::ALL[i % Profile::ALL.len()]
}

pub type Trace = Vec<Vec<NodeState>>;

/// Report CSV plus the committed state of every node after every cycle.
pub fn traced(b: &Bench, cfg: &SimConfig) -> (String, Trace) {
    let mut trace = Vec::new();
    let report = run_simulation_observed(&b.graph, &b.faults, &b.stimulus, cfg, |_, sim| trace.push(sim.states_snapshot()))
        .expect("simulation succeeds");
    (report.to_csv(), trace)
}

/// Output values per cycle as seen by the engine under each fault.
pub fn output_values(b: &Bench, cfg: &SimConfig) -> Vec<Vec<Vec<u64>>> {
    let mut per_cycle = Vec::new();
    run_simulation_observed(&b.graph, &b.faults, &b.stimulus, cfg, |_, sim| {
        let outs: Vec<Vec<u64>> = b
            .faults
            .iter()
            .map(|f| b.graph.outputs.iter().map(|&o| sim.node_state(o).value_under(f.fid)).collect())
            .collect();
        per_cycle.push(outs);
    })
    .expect("simulation succeeds");
    per_cycle
}

/// Same shape as [`output_values`], from independent single-fault runs.
pub fn single_fault_values(b: &Bench) -> Vec<Vec<Vec<u64>>> {
    let runs: Vec<_> = b.faults.iter().map(|f| run_single_fault(&b.graph, f, &b.stimulus).expect("oracle run")).collect();
    (0..b.stimulus.rows.len()).map(|c| runs.iter().map(|r| r.faulty[c].clone()).collect()).collect()
}

pub fn good_outputs(graph: &RtlGraph, trace: &Trace) -> Vec<Vec<u64>> {
    trace.iter().map(|states| graph.outputs.iter().map(|o| states[o.index()].good).collect()).collect()
}
