use std::sync::atomic::{AtomicU64, Ordering};

use crate::netlist::RtlGraph;
use crate::taskgraph::{TaskGraph, TaskId, TaskKind};

/// Start/end sequence stamps per task and the orderings every schedule must
/// respect: master before its slaves, and every producer or reader of a
/// register before that register's sync.
#[derive(Debug, Default)]
pub(crate) struct Audit {
    seq: AtomicU64,
    start: Vec<AtomicU64>,
    end: Vec<AtomicU64>,
    obligations: Vec<(TaskId, TaskId)>,
}

impl Audit {
    pub(crate) fn new(tg: &TaskGraph, graph: &RtlGraph) -> Self {
        let mut a = Audit::default();
        a.rebuild(tg, graph);
        a
    }

    pub(crate) fn rebuild(&mut self, tg: &TaskGraph, graph: &RtlGraph) {
        self.start.resize_with(tg.len(), || AtomicU64::new(0));
        self.end.resize_with(tg.len(), || AtomicU64::new(0));
        self.obligations = obligations(tg, graph);
    }

    pub(crate) fn obligation_count(&self) -> usize {
        self.obligations.len()
    }

    #[inline]
    pub(crate) fn stamp_start(&self, t: TaskId) {
        let s = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        self.start[t.index()].store(s, Ordering::SeqCst);
    }

    #[inline]
    pub(crate) fn stamp_end(&self, t: TaskId) {
        let s = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        self.end[t.index()].store(s, Ordering::SeqCst);
    }

    /// Number of broken orderings in the cycle just run.
    pub(crate) fn violations(&self) -> u64 {
        self.obligations
            .iter()
            .filter(|(a, b)| {
                let end_a = self.end[a.index()].load(Ordering::SeqCst);
                let start_b = self.start[b.index()].load(Ordering::SeqCst);
                end_a == 0 || start_b == 0 || end_a >= start_b
            })
            .count() as u64
    }
}

fn obligations(tg: &TaskGraph, graph: &RtlGraph) -> Vec<(TaskId, TaskId)> {
    let completion = |n| tg.task_of(n).into_iter().chain(tg.slaves_of(n).iter().copied());
    let mut out = Vec::new();
    for t in tg.tasks() {
        match &t.kind {
            TaskKind::Slave { node, .. } => out.push((tg.task_of(*node).expect("slave has a master"), t.id)),
            TaskKind::LocalSync(regs) => {
                for &r in regs {
                    let node = graph.node(r);
                    for &reader in graph.readers(r) {
                        out.extend(completion(reader).map(|p| (p, t.id)));
                    }
                    if let Some(src) = node.next_src {
                        out.extend(completion(src).map(|p| (p, t.id)));
                        if let Some(w) = tg.sync_task_of(src).filter(|&w| w != t.id) {
                            out.push((t.id, w));
                        }
                    }
                }
            }
            TaskKind::Default(_) | TaskKind::Master(_) => {}
        }
    }
    out.sort();
    out.dedup();
    out
}
