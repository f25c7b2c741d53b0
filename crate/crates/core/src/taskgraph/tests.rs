use std::collections::BTreeSet;

use super::*;
use crate::netlist::load_netlist;

fn edges(tg: &TaskGraph, g: &RtlGraph) -> BTreeSet<(String, String)> {
    tg.canonical_edges(g)
}

fn e(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

#[test]
fn chain_and_diamond() {
    let g = load_netlist("input a 1\nassign b 1 = NOT a\nassign c 1 = NOT b").unwrap();
    let tg = build_task_graph(&g);
    assert_eq!(tg.len(), 2);
    assert_eq!(edges(&tg, &g), BTreeSet::from([e("default:b", "default:c")]));

    let g = load_netlist("input a 1\nassign b 1 = NOT a\nassign c 1 = NOT a\nassign d 1 = AND b c").unwrap();
    let tg = build_task_graph(&g);
    let d = tg.task_of(g.lookup("d").unwrap()).unwrap();
    assert_eq!(tg.task(d).preds.len(), 2);
}

const SYNC_EXAMPLE: &str = "input x 1\nreg a 1 = 0\nassign c 1 = NOT x\nassign d 1 = AND a c\n\
                            assign e 1 = XOR c x\nassign f 1 = NOT d\nnext a = e";

#[test]
fn local_sync_waits_for_readers_and_producer() {
    let g = load_netlist(SYNC_EXAMPLE).unwrap();
    let tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::PerReg).unwrap();
    let expect = BTreeSet::from([
        e("default:c", "default:d"),
        e("default:c", "default:e"),
        e("default:d", "default:f"),
        e("default:d", "sync:a"),
        e("default:e", "sync:a"),
    ]);
    assert_eq!(edges(&tg, &g), expect);
    let s = tg.sync_task_of(g.lookup("a").unwrap()).unwrap();
    assert!(tg.task(s).succ.is_empty());
}

#[test]
fn global_sync_has_no_compute_edges() {
    let g = load_netlist(SYNC_EXAMPLE).unwrap();
    let mut tg = build_task_graph(&g).insert_global_sync(&g, &SyncGrouping::PerReg).unwrap();
    let s = tg.sync_task_of(g.lookup("a").unwrap()).unwrap();
    assert!(tg.task(s).preds.is_empty());
    assert_eq!(tg.task(s).phase, Phase::Sync);
    let [compute, sync] = tg.reset_for_cycle().unwrap();
    assert_eq!(compute.len(), 1);
    assert_eq!(sync, vec![s]);
}

#[test]
fn unread_register_and_groups() {
    let g = load_netlist("input x 1\nreg r 1 = 0\nreg q 1 = 0\nassign y 1 = NOT x\nassign z 1 = AND x q\nnext r = y\nnext q = z").unwrap();
    let tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::PerReg).unwrap();
    let r = tg.sync_task_of(g.lookup("r").unwrap()).unwrap();
    assert_eq!(tg.task(r).preds, vec![tg.task_of(g.lookup("y").unwrap()).unwrap()]);

    let tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::Chunks(2)).unwrap();
    let r = tg.sync_task_of(g.lookup("r").unwrap()).unwrap();
    assert_eq!(Some(r), tg.sync_task_of(g.lookup("q").unwrap()));
    let preds: BTreeSet<String> = tg.task(r).preds.iter().map(|&p| tg.label(p, &g)).collect();
    assert_eq!(preds, BTreeSet::from(["default:y".to_string(), "default:z".to_string()]));

    let part = SyncGrouping::Partition(vec![vec!["q".into()]]);
    let tg = build_task_graph(&g).insert_local_sync(&g, &part).unwrap();
    assert_ne!(tg.sync_task_of(g.lookup("r").unwrap()), tg.sync_task_of(g.lookup("q").unwrap()));
    let bad = SyncGrouping::Partition(vec![vec!["y".into()]]);
    assert!(build_task_graph(&g).insert_local_sync(&g, &bad).is_err());
}

#[test]
fn register_swap_merges_groups() {
    let g = load_netlist("reg p 1 = 0\nreg q 1 = 1\nreg s 1 = 0\nnext p = q\nnext q = p\nnext s = p").unwrap();
    let tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::PerReg).unwrap();
    let p = tg.sync_task_of(g.lookup("p").unwrap()).unwrap();
    assert_eq!(Some(p), tg.sync_task_of(g.lookup("q").unwrap()));
    let s = tg.sync_task_of(g.lookup("s").unwrap()).unwrap();
    assert_ne!(p, s);
    // s loads p, so it must read before p's group writes
    assert!(tg.task(p).preds.contains(&s));
}

const EXPAND_EXAMPLE: &str = "input a 1\ninput b 1\nassign c 1 = AND a b\nassign d 1 = NOT c\nassign e 1 = OR c d";

#[test]
fn expansion_topology() {
    let g = load_netlist(EXPAND_EXAMPLE).unwrap();
    let mut tg = build_task_graph(&g);
    let c = g.lookup("c").unwrap();
    tg.expand_high_load(c, 2, &g).unwrap();
    let expect = BTreeSet::from([
        e("master:c", "slave:c:0"),
        e("master:c", "slave:c:1"),
        e("master:c", "default:d"),
        e("master:c", "default:e"),
        e("slave:c:0", "default:d"),
        e("slave:c:1", "default:d"),
        e("slave:c:0", "default:e"),
        e("slave:c:1", "default:e"),
        e("default:d", "default:e"),
    ]);
    assert_eq!(edges(&tg, &g), expect);
    let d = tg.task_of(g.lookup("d").unwrap()).unwrap();
    assert_eq!(tg.task(d).preds.len(), 3);
    assert_eq!(tg.expand_high_load(c, 2, &g), Err(TaskGraphError::AlreadyExpanded("c".into())));
    assert_eq!(tg.expand_high_load(g.lookup("a").unwrap(), 2, &g), Err(TaskGraphError::NotExpandable("a".into())));
    assert_eq!(tg.expand_high_load(g.lookup("d").unwrap(), 0, &g), Err(TaskGraphError::ZeroSlaves));
}

#[test]
fn master_ready_like_default() {
    let g = load_netlist(EXPAND_EXAMPLE).unwrap();
    let mut tg = build_task_graph(&g);
    let before = tg.reset_for_cycle().unwrap();
    let mut tg = build_task_graph(&g);
    tg.expand_high_load(g.lookup("c").unwrap(), 1, &g).unwrap();
    assert_eq!(tg.reset_for_cycle().unwrap(), before);
}

#[test]
fn expansions_commute() {
    let g = load_netlist(EXPAND_EXAMPLE).unwrap();
    let (c, d) = (g.lookup("c").unwrap(), g.lookup("d").unwrap());
    let mut x = build_task_graph(&g);
    x.expand_high_load(c, 3, &g).unwrap();
    x.expand_high_load(d, 2, &g).unwrap();
    let mut y = build_task_graph(&g);
    y.expand_high_load(d, 2, &g).unwrap();
    y.expand_high_load(c, 3, &g).unwrap();
    assert_eq!(edges(&x, &g), edges(&y, &g));
}

#[test]
fn expansion_after_sync_feeds_sync() {
    let g = load_netlist(SYNC_EXAMPLE).unwrap();
    let mut tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::PerReg).unwrap();
    tg.expand_high_load(g.lookup("d").unwrap(), 2, &g).unwrap();
    let s = tg.sync_task_of(g.lookup("a").unwrap()).unwrap();
    let preds: BTreeSet<String> = tg.task(s).preds.iter().map(|&p| tg.label(p, &g)).collect();
    let expect: BTreeSet<String> =
        ["master:d", "slave:d:0", "slave:d:1", "default:e"].iter().map(|s| s.to_string()).collect();
    assert_eq!(preds, expect);
}

#[test]
fn reset_detects_incomplete_cycle() {
    let g = load_netlist("input a 1\nassign b 1 = NOT a\nassign c 1 = NOT b").unwrap();
    let mut tg = build_task_graph(&g);
    let [ready, _] = tg.reset_for_cycle().unwrap();
    assert_eq!(ready, vec![TaskId(0)]);
    assert!(matches!(tg.reset_for_cycle(), Err(TaskGraphError::Incomplete { .. })));
    // drain in order
    for t in tg.topo_order() {
        tg.mark_run(t);
        for s in tg.phase_succ(t).collect::<Vec<_>>() {
            tg.release(s);
        }
    }
    assert!(tg.check_drained().is_ok());
    assert!(tg.reset_for_cycle().is_ok());
}

#[test]
fn dot_lists_every_task_and_edge() {
    let g = load_netlist(SYNC_EXAMPLE).unwrap();
    let tg = build_task_graph(&g).insert_local_sync(&g, &SyncGrouping::PerReg).unwrap();
    let dot = tg.to_dot(&g);
    assert!(dot.starts_with("digraph tasks {"));
    assert_eq!(dot.matches("label=").count(), tg.len());
    assert_eq!(dot.matches(" -> ").count(), 5);
    assert!(dot.contains("label=\"sync:a\", shape=diamond"));
}

#[test]
fn precedes_follows_edges_and_barrier() {
    let g = load_netlist(SYNC_EXAMPLE).unwrap();
    let tg = build_task_graph(&g).insert_global_sync(&g, &SyncGrouping::PerReg).unwrap();
    let c = tg.task_of(g.lookup("c").unwrap()).unwrap();
    let f = tg.task_of(g.lookup("f").unwrap()).unwrap();
    let e = tg.task_of(g.lookup("e").unwrap()).unwrap();
    let s = tg.sync_task_of(g.lookup("a").unwrap()).unwrap();
    assert!(tg.precedes(c, f));
    assert!(!tg.precedes(e, f));
    assert!(tg.precedes(f, s));
    assert!(!tg.precedes(s, c));
}
