use std::cell::RefCell;
use std::sync::atomic::{AtomicU64, Ordering};
use quanta::Instant;

use parking_lot::{Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};
use smallvec::SmallVec;

use super::audit::Audit;
use super::stats::LoadMonitor;
use crate::fault::{FaultId, FaultTable};
use crate::netlist::{NodeId, RtlGraph};
use crate::sim::{
    affected_fids, check_dependence_changed, eval_bad_set_into, eval_good, sync_register, BadGate, NodeState,
};
use crate::taskgraph::{TaskGraph, TaskId, TaskKind};

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub skipped: AtomicU64,
    pub evaluated: AtomicU64,
    pub executed: AtomicU64,
    pub sync_ns: AtomicU64,
}

/// Everything a task may touch during one cycle.
pub(crate) struct Shared<'a> {
    pub graph: &'a RtlGraph,
    pub table: &'a FaultTable,
    pub tg: &'a TaskGraph,
    pub states: &'a [RwLock<NodeState>],
    /// Pre-sync register states, kept when the steady-state check is on.
    pub snaps: Option<&'a [Mutex<Option<NodeState>>]>,
    pub monitor: &'a LoadMonitor,
    pub audit: Option<&'a Audit>,
    pub busy: &'a [AtomicU64],
    pub counters: &'a Counters,
    pub cycle: u32,
    pub cold: bool,
    pub no_skip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOutcome {
    Evaluated,
    Skipped,
    Partial,
    Synced,
}

#[derive(Default)]
struct Scratch {
    affected: Vec<FaultId>,
    bads: Vec<BadGate>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

type Guards<'a> = SmallVec<[RwLockReadGuard<'a, NodeState>; 3]>;

impl<'a> Shared<'a> {
    fn read_fanins(&self, n: NodeId) -> Guards<'a> {
        self.graph.node(n).fanin.iter().map(|f| self.states[f.index()].read_recursive()).collect()
    }

    fn write(&self, n: NodeId) -> RwLockWriteGuard<'a, NodeState> {
        self.states[n.index()]
            .try_write()
            .unwrap_or_else(|| panic!("concurrent access to state of `{}`", self.graph.node(n).name))
    }
}

/// Run one task: dependence check and evaluation for compute tasks, a
/// bad-gate slice for slaves, register commit for sync tasks.
pub(crate) fn execute_task(sh: &Shared<'_>, t: TaskId) -> TaskOutcome {
    if let Some(a) = sh.audit {
        a.stamp_start(t);
    }
    let t0 = Instant::now();
    let outcome = match &sh.tg.task(t).kind {
        TaskKind::Default(n) => exec_eval(sh, *n, false),
        TaskKind::Master(n) => exec_eval(sh, *n, true),
        TaskKind::Slave { node, index } => exec_slave(sh, *node, *index as usize),
        TaskKind::LocalSync(regs) => exec_sync(sh, regs),
    };
    let ns = t0.elapsed().as_nanos() as u64;
    sh.monitor.record(t.index(), ns);
    let worker = rayon::current_thread_index().unwrap_or(0).min(sh.busy.len() - 1);
    sh.busy[worker].fetch_add(ns, Ordering::Relaxed);
    let c = sh.counters;
    c.executed.fetch_add(1, Ordering::Relaxed);
    match outcome {
        TaskOutcome::Evaluated => c.evaluated.fetch_add(1, Ordering::Relaxed),
        TaskOutcome::Skipped => c.skipped.fetch_add(1, Ordering::Relaxed),
        TaskOutcome::Synced => c.sync_ns.fetch_add(ns, Ordering::Relaxed),
        TaskOutcome::Partial => 0,
    };
    if let Some(a) = sh.audit {
        a.stamp_end(t);
    }
    let runs = sh.tg.mark_run(t);
    assert!(runs == 1, "task {t} executed {runs} times in cycle {}", sh.cycle);
    outcome
}

fn exec_eval(sh: &Shared<'_>, n: NodeId, master: bool) -> TaskOutcome {
    let node = sh.graph.node(n);
    let inj = sh.table.at(n);
    let guards = sh.read_fanins(n);
    let fanins: SmallVec<[&NodeState; 3]> = guards.iter().map(|g| &**g).collect();
    let mut own = sh.write(n);
    let board = if master { sh.tg.board(n) } else { None };
    if !sh.no_skip && !check_dependence_changed(&fanins, inj, sh.cycle, sh.cold) {
        own.good_changed = false;
        own.bads_changed = false;
        if let Some(b) = board {
            b.publish(Vec::new(), own.good, false);
        }
        return TaskOutcome::Skipped;
    }
    let goods: SmallVec<[u64; 3]> = fanins.iter().map(|s| s.good).collect();
    let new_good = eval_good(node, &goods);
    if let Some(b) = board {
        let mut affected = std::mem::take(&mut *b.affected.write());
        affected_fids(&fanins, &own, inj, sh.cycle, &mut affected);
        own.good_changed = new_good != own.good;
        own.good = new_good;
        b.publish(affected, new_good, true);
        return TaskOutcome::Evaluated;
    }
    SCRATCH.with(|s| {
        let s = &mut *s.borrow_mut();
        affected_fids(&fanins, &own, inj, sh.cycle, &mut s.affected);
        s.bads.clear();
        eval_bad_set_into(node, &fanins, inj, new_good, sh.cycle, &s.affected, 0..s.affected.len(), &mut s.bads);
        own.good_changed = new_good != own.good;
        own.bads_changed = s.bads != own.bads;
        own.good = new_good;
        if own.bads_changed {
            std::mem::swap(&mut own.bads, &mut s.bads);
        }
        own.last_eval_pass += 1;
    });
    TaskOutcome::Evaluated
}

fn exec_slave(sh: &Shared<'_>, n: NodeId, index: usize) -> TaskOutcome {
    let board = sh.tg.board(n).expect("slave of an expanded node");
    let active = board.active.load(Ordering::Acquire);
    if active {
        let guards = sh.read_fanins(n);
        let fanins: SmallVec<[&NodeState; 3]> = guards.iter().map(|g| &**g).collect();
        let affected = board.affected.read();
        let range = board.ranges.read()[index].clone();
        let good = board.new_good.load(Ordering::Relaxed);
        let mut seg = board.segments[index].lock();
        seg.clear();
        eval_bad_set_into(sh.graph.node(n), &fanins, sh.table.at(n), good, sh.cycle, &affected, range, &mut seg);
    }
    if board.finish_slave() && active {
        let mut own = sh.write(n);
        let mut merged = Vec::with_capacity(board.segments.iter().map(|s| s.lock().len()).sum());
        for s in &board.segments {
            merged.extend_from_slice(&s.lock());
        }
        own.bads_changed = merged != own.bads;
        own.bads = merged;
        own.last_eval_pass += 1;
    }
    TaskOutcome::Partial
}

fn exec_sync(sh: &Shared<'_>, regs: &[NodeId]) -> TaskOutcome {
    let next_cycle = sh.cycle + 1;
    let updated: SmallVec<[NodeState; 2]> = regs
        .iter()
        .map(|&r| {
            let node = sh.graph.node(r);
            let cur = sh.states[r.index()].read_recursive();
            if let Some(snaps) = sh.snaps {
                *snaps[r.index()].lock() = Some(cur.clone());
            }
            let next = match node.next_src {
                Some(src) => sync_register(node, &cur, &sh.states[src.index()].read_recursive(), sh.table.at(r), next_cycle),
                None => sync_register(node, &cur, &cur, sh.table.at(r), next_cycle),
            };
            next
        })
        .collect();
    for (&r, mut state) in regs.iter().zip(updated) {
        let mut slot = sh.write(r);
        state.last_eval_pass = slot.last_eval_pass + 1;
        *slot = state;
    }
    TaskOutcome::Synced
}

/// Drain a phase on the calling thread.
pub(crate) fn drain_serial(sh: &Shared<'_>, ready: &[TaskId]) {
    let mut stack: Vec<TaskId> = ready.iter().rev().copied().collect();
    while let Some(t) = stack.pop() {
        execute_task(sh, t);
        for s in sh.tg.phase_succ(t) {
            if sh.tg.release(s) {
                stack.push(s);
            }
        }
    }
}

/// Drain a phase on the pool. A finished task continues inline with one
/// newly ready successor and spawns the rest for stealing.
pub(crate) fn drain_pool(pool: &rayon::ThreadPool, sh: &Shared<'_>, ready: &[TaskId]) {
    pool.scope(|scope| {
        for &t in ready {
            scope.spawn(move |s| run_chain(sh, s, t));
        }
    });
}

fn run_chain<'s>(sh: &'s Shared<'_>, scope: &rayon::Scope<'s>, mut t: TaskId) {
    loop {
        execute_task(sh, t);
        let mut next = None;
        for s in sh.tg.phase_succ(t) {
            if sh.tg.release(s) {
                if let Some(prev) = next.replace(s) {
                    scope.spawn(move |sc| run_chain(sh, sc, prev));
                }
            }
        }
        match next {
            Some(n) => t = n,
            None => break,
        }
    }
}
