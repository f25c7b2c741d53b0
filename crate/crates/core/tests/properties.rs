mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use proptest::sample::subsequence;

use common::{fuzz_case, good_outputs, output_values, profile, single_fault_values, traced};
use rtl_fsim::fault::{faulty_val, generate_fault_list, inject, FaultDescriptor, FaultId, FaultKind, FaultLocation, ForcedRule};
use rtl_fsim::netlist::{load_netlist, print_netlist, ElabError, NetlistError, NodeKind, RtlGraph};
use rtl_fsim::oracle::{run_serial_concurrent, single_fault_verdicts};
use rtl_fsim::report::{parse_report_csv, parse_stats};
use rtl_fsim::sched::{run_simulation, LoadMonitor, Mode, SimConfig};
use rtl_fsim::sim::{affected_fids, eval_bad_set, eval_good, BadGate, NodeState};
use rtl_fsim::taskgraph::{publish_ranges, SyncGrouping};

fn case_strategy() -> impl Strategy<Value = (usize, usize, u64)> {
    (0usize..3, 10usize..120, any::<u64>())
}

type NodeShape = (String, NodeKind, u32, Vec<String>, Option<String>);

fn structure(g: &RtlGraph) -> Vec<NodeShape> {
    let name = |id: rtl_fsim::netlist::NodeId| g.node(id).name.clone();
    let mut v: Vec<_> = g
        .nodes
        .iter()
        .map(|n| (n.name.clone(), n.kind.clone(), n.width, n.fanin.iter().map(|&f| name(f)).collect(), n.next_src.map(name)))
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

fn mode_of(i: usize) -> Mode {
    [Mode::Serial, Mode::Structural, Mode::StructuralFault, Mode::Full][i % 4]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn netlist_round_trip((p, size, seed) in case_strategy()) {
        let b = fuzz_case(profile(p), size, seed, 8, 4);
        let again = load_netlist(&print_netlist(&b.graph)).unwrap();
        prop_assert_eq!(structure(&again), structure(&b.graph));
    }

    #[test]
    fn topological_positions_respect_edges((p, size, seed) in case_strategy()) {
        let g = fuzz_case(profile(p), size, seed, 8, 4).graph;
        let pos: HashMap<_, _> = g.topo.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        for n in &g.nodes {
            if matches!(n.kind, NodeKind::Reg { .. }) {
                continue;
            }
            for f in &n.fanin {
                if let (Some(a), Some(b)) = (pos.get(f), pos.get(&n.id)) {
                    prop_assert!(a < b, "{} before {}", g.node(*f).name, n.name);
                }
            }
        }
    }

    #[test]
    fn combinational_back_edge_is_rejected((p, size, seed) in case_strategy(), pick in any::<prop::sample::Index>()) {
        let b = fuzz_case(profile(p), size, seed, 8, 4);
        let g = &b.graph;
        // an edge u -> v between plain two-operand assigns; make u read v
        let plain = |n: &rtl_fsim::netlist::RtlNode| matches!(n.kind, NodeKind::Comb(op) if ["AND", "OR", "XOR", "ADD", "SUB"].contains(&op.opcode().mnemonic()));
        let edges: Vec<(String, String)> = g
            .nodes
            .iter()
            .filter(|v| plain(v))
            .flat_map(|v| v.fanin.iter().filter(|&&u| plain(g.node(u)) && g.node(u).width == v.width).map(move |&u| (u, v.id)))
            .map(|(u, v)| (g.node(u).name.clone(), g.node(v).name.clone()))
            .collect();
        prop_assume!(!edges.is_empty());
        let (u, v) = &edges[pick.index(edges.len())];
        let text: String = b
            .netlist
            .lines()
            .map(|line| {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() == 7 && toks[0] == "assign" && toks[1] == u {
                    format!("assign {} {} = {} {} {}\n", toks[1], toks[2], toks[4], v, toks[6])
                } else {
                    format!("{line}\n")
                }
            })
            .collect();
        let err = load_netlist(&text).unwrap_err();
        prop_assert!(matches!(err, NetlistError::Elab(ElabError::CombCycle { .. })), "{err:?}");
    }

    #[test]
    fn stuck_values_are_absorbing(value in any::<u64>(), bit in 0u32..64, one in any::<bool>(), cycle in 0u32..100) {
        let f = FaultDescriptor {
            fid: FaultId(0),
            location: FaultLocation::Port("a".into()),
            bit,
            kind: if one { FaultKind::Sa1 } else { FaultKind::Sa0 },
        };
        let r: ForcedRule = f.rule();
        let once = faulty_val(r, value, cycle);
        prop_assert_eq!(faulty_val(r, once, cycle), once);
        prop_assert_eq!((once >> bit) & 1, u64::from(one));
    }

    #[test]
    fn empty_fault_list_is_good_simulation((p, size, seed) in case_strategy(), m in 0usize..4) {
        let mut b = fuzz_case(profile(p), size, seed, 8, 12);
        b.faults.clear();
        let (_, trace) = traced(&b, &SimConfig::new(mode_of(m), 2));
        prop_assert!(trace.iter().all(|s| s.iter().all(|n| n.bads.is_empty())));
        let probe = FaultDescriptor { fid: FaultId(0), location: FaultLocation::Wire(b.graph.topo[0]), bit: 0, kind: FaultKind::Transient { start: 999, end: 999 } };
        let plain = rtl_fsim::oracle::run_single_fault(&b.graph, &probe, &b.stimulus).unwrap().good;
        prop_assert_eq!(good_outputs(&b.graph, &trace), plain);
    }

    #[test]
    fn port_faults_keep_good_values((p, size, seed) in case_strategy()) {
        let mut b = fuzz_case(profile(p), size, seed, 8, 10);
        let clean = {
            let mut c = b.clone();
            c.faults.clear();
            good_outputs(&c.graph, &traced(&c, &SimConfig::new(Mode::Full, 2)).1)
        };
        b.faults = generate_fault_list(&b.graph, &[FaultKind::Sa0, FaultKind::Sa1])
            .unwrap()
            .into_iter()
            .filter(|f| matches!(f.location, FaultLocation::Port(_)))
            .take(64)
            .collect();
        let (_, trace) = traced(&b, &SimConfig::new(Mode::Full, 2));
        prop_assert_eq!(good_outputs(&b.graph, &trace), clean);
    }

    #[test]
    fn outputs_match_single_fault_resimulation((p, size, seed) in case_strategy(), m in 0usize..4, workers in 1usize..5) {
        let b = fuzz_case(profile(p), size, seed, 24, 12);
        let cfg = SimConfig { threshold: 0.02, ..SimConfig::new(mode_of(m), workers) };
        prop_assert_eq!(output_values(&b, &cfg), single_fault_values(&b));
    }

    #[test]
    fn concurrent_oracle_agrees_with_single_fault((p, size, seed) in case_strategy()) {
        let b = fuzz_case(profile(p), size, seed, 32, 16);
        let serial = run_serial_concurrent(&b.graph, &b.faults, &b.stimulus).unwrap().verdicts();
        prop_assert_eq!(serial, single_fault_verdicts(&b.graph, &b.faults, &b.stimulus).unwrap());
    }

    #[test]
    fn range_partition_concatenation(
        ga in any::<u8>(), gb in any::<u8>(),
        bads_a in prop::collection::btree_map(0u32..40, any::<u8>(), 0..20),
        bads_b in prop::collection::btree_map(0u32..40, any::<u8>(), 0..20),
        cuts in prop::collection::vec(0usize..64, 0..6),
        op in 0usize..4,
    ) {
        let mnemonic = ["AND", "XOR", "ADD", "SUB"][op];
        let mut g = load_netlist(&format!("input a 8\ninput b 8\nassign y 8 = {mnemonic} a b\noutput o 8 = y")).unwrap();
        let y = g.lookup("y").unwrap();
        let faults: Vec<FaultDescriptor> = (40..46)
            .map(|i| FaultDescriptor { fid: FaultId(i), location: FaultLocation::Wire(y), bit: i % 8, kind: if i % 2 == 0 { FaultKind::Sa0 } else { FaultKind::Sa1 } })
            .collect();
        let table = inject(&mut g, &faults).unwrap();
        let state = |good: u8, bads: &std::collections::BTreeMap<u32, u8>| NodeState {
            good: good.into(),
            bads: bads.iter().filter(|e| *e.1 != good).map(|(f, v)| BadGate::new(*f, u64::from(*v))).collect(),
            good_changed: true,
            bads_changed: true,
            last_eval_pass: 0,
        };
        let (sa, sb) = (state(ga, &bads_a), state(gb, &bads_b));
        let fanins = [&sa, &sb];
        let node = g.node(y);
        let good = eval_good(node, &[sa.good, sb.good]);
        let mut affected = Vec::new();
        affected_fids(&fanins, &NodeState::default(), table.at(y), 0, &mut affected);
        let len = affected.len();
        let whole = eval_bad_set(node, &fanins, table.at(y), good, 0, &affected, 0..len);
        let mut bounds: Vec<usize> = cuts.into_iter().map(|c| c.min(len)).collect();
        bounds.extend([0, len]);
        bounds.sort_unstable();
        let mut joined = Vec::new();
        for w in bounds.windows(2) {
            joined.extend(eval_bad_set(node, &fanins, table.at(y), good, 0, &affected, w[0]..w[1]));
        }
        prop_assert_eq!(&joined, &whole);
        for k in 1..6 {
            let parts: Vec<BadGate> = publish_ranges(len, k)
                .into_iter()
                .flat_map(|r| eval_bad_set(node, &fanins, table.at(y), good, 0, &affected, r))
                .collect();
            prop_assert_eq!(&parts, &whole);
        }
    }

    #[test]
    fn skipping_is_sound((p, size, seed) in case_strategy(), m in 0usize..4) {
        let b = fuzz_case(profile(p), size, seed, 32, 16);
        let base = SimConfig::new(mode_of(m), 2);
        let (csv, trace) = traced(&b, &base);
        let (csv_all, trace_all) = traced(&b, &SimConfig { no_skip: true, ..base });
        prop_assert_eq!(csv, csv_all);
        let goods = |t: &common::Trace| t.iter().map(|s| s.iter().map(|n| (n.good, n.bads.clone())).collect::<Vec<_>>()).collect::<Vec<_>>();
        prop_assert_eq!(goods(&trace), goods(&trace_all));
    }

    #[test]
    fn traces_identical_across_workers((p, size, seed) in case_strategy(), m in 1usize..4) {
        let b = fuzz_case(profile(p), size, seed, 32, 12);
        let reference = traced(&b, &SimConfig::new(Mode::Serial, 1));
        let strip = |t: common::Trace| t.into_iter().map(|s| s.into_iter().map(|n| (n.good, n.bads)).collect::<Vec<_>>()).collect::<Vec<_>>();
        let reference = (reference.0, strip(reference.1));
        for workers in [1, 2, 4] {
            let (csv, t) = traced(&b, &SimConfig { threshold: 0.01, ..SimConfig::new(mode_of(m), workers) });
            prop_assert_eq!(&csv, &reference.0);
            prop_assert_eq!(strip(t), reference.1.clone());
        }
    }

    #[test]
    fn expansions_are_transparent((p, size, seed) in case_strategy(), picks in subsequence((0..64usize).collect::<Vec<_>>(), 0..6), slaves in 1usize..5, m in 0usize..4) {
        let b = fuzz_case(profile(p), size, seed, 32, 12);
        let comb: Vec<String> = b.graph.nodes.iter().filter(|n| n.kind.is_evaluated()).map(|n| n.name.clone()).collect();
        let chosen: Vec<String> = picks.into_iter().filter(|&i| i < comb.len()).map(|i| comb[i].clone()).collect();
        let plain = traced(&b, &SimConfig::new(Mode::Serial, 1)).0;
        let cfg = SimConfig { pre_expand: chosen, slaves: Some(slaves), audit: true, ..SimConfig::new(mode_of(m), 3) };
        prop_assert_eq!(traced(&b, &cfg).0, plain);
    }

    #[test]
    fn local_and_global_sync_agree((p, size, seed) in case_strategy(), chunk in 1usize..5) {
        let b = fuzz_case(profile(p), size, seed, 32, 12);
        let global = traced(&b, &SimConfig::new(Mode::Structural, 2)).0;
        for grouping in [SyncGrouping::PerReg, SyncGrouping::Chunks(chunk)] {
            let cfg = SimConfig { sync_grouping: grouping, audit: true, ..SimConfig::new(Mode::Full, 2) };
            prop_assert_eq!(traced(&b, &cfg).0, global.clone());
        }
    }

    #[test]
    fn drop_on_detect_preserves_verdicts((p, size, seed) in case_strategy()) {
        let b = fuzz_case(profile(p), size, seed, 32, 16);
        let keep = run_simulation(&b.graph, &b.faults, &b.stimulus, &SimConfig::new(Mode::Full, 2)).unwrap();
        let cfg = SimConfig { drop_on_detect: true, ..SimConfig::new(Mode::Full, 2) };
        let drop = run_simulation(&b.graph, &b.faults, &b.stimulus, &cfg).unwrap();
        prop_assert_eq!(keep.verdicts(), drop.verdicts());
    }

    #[test]
    fn report_and_stats_round_trip((p, size, seed) in case_strategy()) {
        let b = fuzz_case(profile(p), size, seed, 16, 8);
        let r = run_simulation(&b.graph, &b.faults, &b.stimulus, &SimConfig::new(Mode::Full, 2)).unwrap();
        prop_assert_eq!(parse_report_csv(&r.to_csv()).unwrap(), r.records.clone());
        let doc = parse_stats(&r.stats_toml()).unwrap();
        prop_assert_eq!(doc.cycles, r.cycle_stats.clone());
        prop_assert_eq!(doc.summary.detected, r.detected());
    }

    #[test]
    fn busy_time_fits_in_windows((p, size, seed) in case_strategy(), workers in 1usize..4) {
        let b = fuzz_case(profile(p), size, seed, 16, 8);
        let cfg = SimConfig { utilization_window_ns: 50_000, ..SimConfig::new(Mode::Full, workers) };
        let r = run_simulation(&b.graph, &b.faults, &b.stimulus, &cfg).unwrap();
        prop_assert!(!r.utilization.is_empty());
        for w in &r.utilization {
            prop_assert!(w.busy_ns.iter().sum::<u64>() <= w.wall_ns * workers as u64);
            prop_assert!(w.max_busy_fraction <= 1.0 && w.min_busy_fraction <= w.max_busy_fraction);
        }
    }

    #[test]
    fn monitor_shares_sum_to_one(ns in prop::collection::vec(0u64..1_000_000, 1..64)) {
        let m = LoadMonitor::new(ns.len(), 0.5);
        prop_assume!(ns.iter().any(|&x| x > 0));
        for (i, &t) in ns.iter().enumerate() {
            m.record(i, t);
        }
        let total: f64 = m.shares().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
