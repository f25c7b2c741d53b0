use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::netlist::NodeId;
use crate::taskgraph::{TaskGraph, TaskKind};

/// Measurements for one simulated cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycle: u32,
    pub wall_ns: u64,
    pub busy_ns: Vec<u64>,
    /// Tasks run (every task runs once per cycle).
    pub executed: u64,
    /// Default/Master tasks whose dependence check found nothing to do.
    pub skipped: u64,
    /// Default/Master tasks that evaluated.
    pub evaluated: u64,
    /// Nodes expanded at the end of this cycle.
    pub expansions: Vec<String>,
    pub sync_ns: u64,
    /// Node with the largest share of compute time, with that share.
    pub heaviest_node: String,
    pub heaviest_share: f64,
}

/// Worker busy fractions over one sampling window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilWindow {
    pub index: u32,
    pub first_cycle: u32,
    pub last_cycle: u32,
    pub wall_ns: u64,
    pub busy_ns: Vec<u64>,
    pub max_busy_fraction: f64,
    pub min_busy_fraction: f64,
}

/// Accumulates cycle wall and busy time into fixed-length windows.
#[derive(Debug)]
pub(crate) struct UtilSampler {
    window_ns: u64,
    current: Option<UtilWindow>,
    pub(crate) done: Vec<UtilWindow>,
}

impl UtilSampler {
    pub(crate) fn new(window_ns: u64) -> Self {
        UtilSampler { window_ns: window_ns.max(1), current: None, done: Vec::new() }
    }

    pub(crate) fn add(&mut self, stats: &CycleStats) {
        let index = self.done.len() as u32;
        let w = self.current.get_or_insert_with(|| UtilWindow {
            index,
            first_cycle: stats.cycle,
            busy_ns: vec![0; stats.busy_ns.len()],
            ..Default::default()
        });
        w.last_cycle = stats.cycle;
        w.wall_ns += stats.wall_ns;
        for (acc, b) in w.busy_ns.iter_mut().zip(&stats.busy_ns) {
            *acc += b;
        }
        if w.wall_ns >= self.window_ns {
            self.close();
        }
    }

    pub(crate) fn close(&mut self) {
        if let Some(mut w) = self.current.take() {
            let frac = |b: u64| if w.wall_ns == 0 { 0.0 } else { b as f64 / w.wall_ns as f64 };
            w.max_busy_fraction = w.busy_ns.iter().map(|&b| frac(b)).fold(0.0, f64::max);
            w.min_busy_fraction = w.busy_ns.iter().map(|&b| frac(b)).fold(f64::INFINITY, f64::min);
            if !w.min_busy_fraction.is_finite() {
                w.min_busy_fraction = 0.0;
            }
            self.done.push(w);
        }
    }
}

/// Per-task execution time for the current cycle.
#[derive(Debug, Default)]
pub struct LoadMonitor {
    task_ns: Vec<AtomicU64>,
    pub threshold: f64,
}

impl LoadMonitor {
    pub fn new(tasks: usize, threshold: f64) -> Self {
        LoadMonitor { task_ns: (0..tasks).map(|_| AtomicU64::new(0)).collect(), threshold }
    }

    pub(crate) fn resize(&mut self, tasks: usize) {
        self.task_ns.resize_with(tasks, || AtomicU64::new(0));
    }

    pub(crate) fn reset(&mut self) {
        for t in &mut self.task_ns {
            *t.get_mut() = 0;
        }
    }

    #[inline]
    pub fn record(&self, task: usize, ns: u64) {
        self.task_ns[task].fetch_add(ns, Ordering::Relaxed);
    }

    pub fn total_ns(&self) -> u64 {
        self.task_ns.iter().map(|t| t.load(Ordering::Relaxed)).sum()
    }

    pub fn task_ns(&self, task: usize) -> u64 {
        self.task_ns[task].load(Ordering::Relaxed)
    }

    /// Each task's share of this cycle's total time; all zero when nothing
    /// was measurable.
    pub fn shares(&self) -> Vec<f64> {
        let total = self.total_ns();
        self.task_ns
            .iter()
            .map(|t| if total == 0 { 0.0 } else { t.load(Ordering::Relaxed) as f64 / total as f64 })
            .collect()
    }

    /// Time attributed to each node's compute tasks (master and slaves
    /// summed).
    pub fn node_ns(&self, tg: &TaskGraph, nodes: usize) -> Vec<u64> {
        let mut out = vec![0u64; nodes];
        for t in tg.tasks() {
            let node = match t.kind {
                TaskKind::Default(n) | TaskKind::Master(n) | TaskKind::Slave { node: n, .. } => n,
                TaskKind::LocalSync(_) => continue,
            };
            out[node.index()] += self.task_ns(t.id.index());
        }
        out
    }
}

/// Unexpanded nodes whose share of the cycle exceeds the threshold, heaviest
/// first (ties by node id), at most `cap` of them.
pub fn flag_overloaded(monitor: &LoadMonitor, tg: &TaskGraph, cap: usize) -> Vec<NodeId> {
    let shares = monitor.shares();
    let mut flagged: Vec<(f64, NodeId)> = tg
        .tasks()
        .iter()
        .filter_map(|t| match t.kind {
            TaskKind::Default(n) if shares[t.id.index()] > monitor.threshold => Some((shares[t.id.index()], n)),
            _ => None,
        })
        .collect();
    flagged.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    flagged.truncate(cap);
    flagged.into_iter().map(|(_, n)| n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::load_netlist;
    use crate::taskgraph::build_task_graph;

    fn chain(n: usize) -> String {
        let mut s = String::from("input a 1\nassign w0 1 = NOT a\n");
        for i in 1..n {
            s.push_str(&format!("assign w{i} 1 = NOT w{}\n", i - 1));
        }
        s
    }

    #[test]
    fn shares_sum_to_one() {
        let m = LoadMonitor::new(4, 0.1);
        for (i, ns) in [5u64, 10, 0, 85].iter().enumerate() {
            m.record(i, *ns);
        }
        let total: f64 = m.shares().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_load_flags_nothing_at_half() {
        let g = load_netlist(&chain(100)).unwrap();
        let tg = build_task_graph(&g);
        let m = LoadMonitor::new(tg.len(), 0.5);
        for t in 0..tg.len() {
            m.record(t, 1000);
        }
        assert!(flag_overloaded(&m, &tg, 8).is_empty());
    }

    #[test]
    fn dominant_task_flagged_first() {
        let g = load_netlist(&chain(10)).unwrap();
        let tg = build_task_graph(&g);
        let m = LoadMonitor::new(tg.len(), 0.1);
        for t in 0..tg.len() {
            m.record(t, if t == 6 { 9000 } else { 100 });
        }
        let flagged = flag_overloaded(&m, &tg, 8);
        assert_eq!(flagged, vec![g.lookup("w6").unwrap()]);

        let m = LoadMonitor::new(tg.len(), 0.0001);
        for t in 0..tg.len() {
            m.record(t, 100 + t as u64);
        }
        let flagged = flag_overloaded(&m, &tg, 3);
        assert_eq!(flagged.len(), 3);
        assert_eq!(flagged[0], g.lookup("w9").unwrap());
    }

    #[test]
    fn windows_close_on_length() {
        let mut s = UtilSampler::new(100);
        for cycle in 0..5 {
            s.add(&CycleStats { cycle, wall_ns: 40, busy_ns: vec![40, 10], ..Default::default() });
        }
        s.close();
        assert_eq!(s.done.len(), 2);
        assert_eq!((s.done[0].first_cycle, s.done[0].last_cycle), (0, 2));
        assert_eq!(s.done[0].busy_ns, vec![120, 30]);
        assert!((s.done[0].max_busy_fraction - 1.0).abs() < 1e-12);
        assert!((s.done[0].min_busy_fraction - 0.25).abs() < 1e-12);
    }
}
