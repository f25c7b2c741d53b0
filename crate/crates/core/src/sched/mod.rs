//! Cycle driver: applies stimulus, runs the task graph on a worker pool,
//! strobes outputs, and expands overloaded nodes between cycles.

mod audit;
mod exec;
mod stats;

pub use exec::TaskOutcome;
pub use stats::{flag_overloaded, CycleStats, LoadMonitor, UtilWindow};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use audit::Audit;
use exec::{drain_pool, drain_serial, Counters, Shared};
use stats::UtilSampler;

use crate::fault::{inject, FaultDescriptor, FaultError, FaultId, FaultTable};
use crate::netlist::{NodeId, NodeKind, RtlGraph};
use crate::report::{FaultRecord, SimulationReport, Verdict};
use crate::sim::{evaluate, initial_register, sync_register, NodeState};
use crate::stimulus::{Stimulus, StimulusError};
use crate::taskgraph::{build_task_graph, SyncGrouping, SyncMode, TaskGraph, TaskGraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// One thread, task graph drained in place.
    Serial,
    /// Node-level parallelism with a barrier before register commit.
    Structural,
    /// Structural plus master/slave expansion of heavy nodes.
    StructuralFault,
    /// Expansion plus per-register sync tasks inside the cycle.
    Full,
}

impl Mode {
    pub const PARALLEL: [Mode; 3] = [Mode::Structural, Mode::StructuralFault, Mode::Full];

    pub fn sync_mode(self) -> SyncMode {
        match self {
            Mode::Serial | Mode::Full => SyncMode::Local,
            Mode::Structural | Mode::StructuralFault => SyncMode::Global,
        }
    }

    pub fn expands(self) -> bool {
        matches!(self, Mode::StructuralFault | Mode::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Serial => "serial",
            Mode::Structural => "structural",
            Mode::StructuralFault => "structural+fault",
            Mode::Full => "full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(Mode::Serial),
            "structural" => Ok(Mode::Structural),
            "structural+fault" | "structural-fault" => Ok(Mode::StructuralFault),
            "full" => Ok(Mode::Full),
            _ => Err(SimError::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub workers: usize,
    pub mode: Mode,
    /// Share of cycle time above which a node is expanded.
    pub threshold: f64,
    /// Slaves per expanded node; defaults to the worker count.
    pub slaves: Option<usize>,
    pub max_expansions_per_cycle: usize,
    pub drop_on_detect: bool,
    /// Re-evaluate every node after each cycle and fail if anything moves.
    pub steady_state_check: bool,
    /// Check ordering stamps after each cycle.
    pub audit: bool,
    /// Evaluate every node every cycle.
    pub no_skip: bool,
    pub sync_grouping: SyncGrouping,
    /// Nodes expanded before the first cycle.
    pub pre_expand: Vec<String>,
    pub utilization_window_ns: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            workers: 1,
            mode: Mode::Full,
            threshold: 0.0001,
            slaves: None,
            max_expansions_per_cycle: 8,
            drop_on_detect: false,
            steady_state_check: false,
            audit: false,
            no_skip: false,
            sync_grouping: SyncGrouping::PerReg,
            pre_expand: Vec::new(),
            utilization_window_ns: 100_000_000,
        }
    }
}

impl SimConfig {
    pub fn new(mode: Mode, workers: usize) -> Self {
        SimConfig { mode, workers, ..Default::default() }
    }

    pub fn slave_count(&self) -> usize {
        self.slaves.unwrap_or(self.workers).max(1)
    }

    fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("mode".into(), self.mode.to_string());
        m.insert("workers".into(), self.workers.to_string());
        m.insert("threshold".into(), self.threshold.to_string());
        m.insert("slaves".into(), self.slave_count().to_string());
        m.insert("max_expansions_per_cycle".into(), self.max_expansions_per_cycle.to_string());
        m.insert("drop_on_detect".into(), self.drop_on_detect.to_string());
        m
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    TaskGraph(#[from] TaskGraphError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("cycle {cycle}: stimulus row has {got} values, circuit has {expected} inputs")]
    RowWidth { cycle: u32, expected: usize, got: usize },
    #[error("deadlock in cycle {cycle}; stuck tasks: {}", stuck.join(", "))]
    Deadlock { cycle: u32, stuck: Vec<String> },
    #[error("invariant violation in cycle {cycle}: {msg}")]
    Invariant { cycle: u32, msg: String },
}

impl SimError {
    /// True for errors raised by the engine's own consistency checks.
    pub fn is_invariant(&self) -> bool {
        matches!(self, SimError::Deadlock { .. } | SimError::Invariant { .. } | SimError::TaskGraph(_))
    }
}

/// Stateful engine; call [`Simulator::step`] once per cycle.
pub struct Simulator {
    graph: RtlGraph,
    faults: Vec<FaultDescriptor>,
    table: FaultTable,
    tg: TaskGraph,
    states: Vec<RwLock<NodeState>>,
    snaps: Vec<Mutex<Option<NodeState>>>,
    pool: Option<rayon::ThreadPool>,
    config: SimConfig,
    monitor: LoadMonitor,
    audit: Option<Audit>,
    busy: Vec<AtomicU64>,
    fid_pos: HashMap<FaultId, usize>,
    detect: Vec<Option<(u32, NodeId)>>,
    stats: Vec<CycleStats>,
    sampler: UtilSampler,
    expanded: Vec<String>,
    audit_violations: u64,
    wall_ns: u64,
    cycle: u32,
}

impl Simulator {
    pub fn new(graph: &RtlGraph, faults: &[FaultDescriptor], config: &SimConfig) -> Result<Self, SimError> {
        if config.workers == 0 {
            return Err(SimError::Config("worker count must be at least 1".into()));
        }
        if !(config.threshold > 0.0 && config.threshold < 1.0) {
            return Err(SimError::Config(format!("threshold {} outside (0, 1)", config.threshold)));
        }
        if config.slaves == Some(0) {
            return Err(SimError::Config("slave count must be at least 1".into()));
        }
        let mut graph = graph.clone();
        let table = inject(&mut graph, faults)?;
        let mut tg = build_task_graph(&graph);
        tg.insert_sync(&graph, config.mode.sync_mode(), &config.sync_grouping)?;
        let mut expanded = Vec::new();
        for name in &config.pre_expand {
            let id = graph.lookup(name).ok_or_else(|| SimError::Config(format!("unknown node `{name}` to expand")))?;
            tg.expand_high_load(id, config.slave_count(), &graph)?;
            expanded.push(name.clone());
        }
        let states = graph
            .nodes
            .iter()
            .map(|n| {
                RwLock::new(match n.kind {
                    NodeKind::Const(v) => NodeState::with_good(v),
                    NodeKind::Reg { .. } => initial_register(n, table.at(n.id)),
                    _ => NodeState::default(),
                })
            })
            .collect();
        let pool = match config.mode {
            Mode::Serial => None,
            _ => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .thread_name(|i| format!("fsim-worker-{i}"))
                    .build()
                    .map_err(|e| SimError::Config(format!("worker pool: {e}")))?,
            ),
        };
        let workers = if pool.is_some() { config.workers } else { 1 };
        let monitor = LoadMonitor::new(tg.len(), config.threshold);
        let audit = config.audit.then(|| Audit::new(&tg, &graph));
        Ok(Simulator {
            snaps: (0..graph.len()).map(|_| Mutex::new(None)).collect(),
            fid_pos: faults.iter().enumerate().map(|(i, f)| (f.fid, i)).collect(),
            detect: vec![None; faults.len()],
            faults: faults.to_vec(),
            busy: (0..workers).map(|_| AtomicU64::new(0)).collect(),
            sampler: UtilSampler::new(config.utilization_window_ns),
            config: config.clone(),
            states,
            graph,
            table,
            tg,
            pool,
            monitor,
            audit,
            stats: Vec::new(),
            expanded,
            audit_violations: 0,
            wall_ns: 0,
            cycle: 0,
        })
    }

    /// Circuit after fault injection (may contain virtual carriers).
    pub fn graph(&self) -> &RtlGraph {
        &self.graph
    }

    pub fn task_graph(&self) -> &TaskGraph {
        &self.tg
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn stats(&self) -> &[CycleStats] {
        &self.stats
    }

    pub fn audit_obligations(&self) -> usize {
        self.audit.as_ref().map_or(0, Audit::obligation_count)
    }

    pub fn node_state(&self, id: NodeId) -> NodeState {
        self.states[id.index()].read().clone()
    }

    pub fn states_snapshot(&self) -> Vec<NodeState> {
        self.states.iter().map(|s| s.read().clone()).collect()
    }

    /// Simulate one cycle with `row` given in circuit input order.
    pub fn step(&mut self, row: &[u64]) -> Result<(), SimError> {
        let cycle = self.cycle;
        if row.len() != self.graph.inputs.len() {
            return Err(SimError::RowWidth { cycle, expected: self.graph.inputs.len(), got: row.len() });
        }
        for (&id, &value) in self.graph.inputs.iter().zip(row) {
            let s = self.states[id.index()].get_mut();
            s.good_changed = cycle == 0 || s.good != value;
            s.bads_changed = cycle == 0;
            s.good = value;
        }
        let [compute, sync] = self.tg.reset_for_cycle()?;
        self.monitor.reset();
        for b in &mut self.busy {
            *b.get_mut() = 0;
        }
        let counters = Counters::default();
        let t0 = Instant::now();
        let outcome = {
            let sh = Shared {
                graph: &self.graph,
                table: &self.table,
                tg: &self.tg,
                states: &self.states,
                snaps: self.config.steady_state_check.then_some(&self.snaps[..]),
                monitor: &self.monitor,
                audit: self.audit.as_ref(),
                busy: &self.busy,
                counters: &counters,
                cycle,
                cold: cycle == 0,
                no_skip: self.config.no_skip,
            };
            let pool = self.pool.as_ref();
            catch_unwind(AssertUnwindSafe(|| {
                for phase in [&compute, &sync] {
                    match pool {
                        Some(p) => drain_pool(p, &sh, phase),
                        None => drain_serial(&sh, phase),
                    }
                }
            }))
        };
        let wall_ns = t0.elapsed().as_nanos() as u64;
        if let Err(payload) = outcome {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "task panicked".into());
            return Err(SimError::Invariant { cycle, msg });
        }
        if let Err(TaskGraphError::Incomplete { pending }) = self.tg.check_drained() {
            let stuck = pending
                .iter()
                .map(|&(t, c)| format!("{} (pred_count {c})", self.tg.label(t, &self.graph)))
                .collect();
            return Err(SimError::Deadlock { cycle, stuck });
        }
        if let Some(a) = &self.audit {
            let v = a.violations();
            self.audit_violations += v;
            if v > 0 {
                return Err(SimError::Invariant { cycle, msg: format!("{v} ordering violations") });
            }
        }
        if self.config.steady_state_check {
            self.check_steady_state().map_err(|msg| SimError::Invariant { cycle, msg })?;
        }
        let newly = self.strobe(cycle);
        if self.config.drop_on_detect && !newly.is_empty() {
            self.drop_faults(&newly);
        }
        let (heaviest_node, heaviest_share) = self.heaviest();
        let mut expansions = Vec::new();
        if self.config.mode.expands() {
            for n in flag_overloaded(&self.monitor, &self.tg, self.config.max_expansions_per_cycle) {
                self.tg.expand_high_load(n, self.config.slave_count(), &self.graph)?;
                expansions.push(self.graph.node(n).name.clone());
            }
            if !expansions.is_empty() {
                self.monitor.resize(self.tg.len());
                if let Some(a) = &mut self.audit {
                    a.rebuild(&self.tg, &self.graph);
                }
                self.expanded.extend(expansions.iter().cloned());
            }
        }
        let stats = CycleStats {
            cycle,
            wall_ns,
            busy_ns: self.busy.iter().map(|b| b.load(Ordering::Relaxed)).collect(),
            executed: counters.executed.load(Ordering::Relaxed),
            skipped: counters.skipped.load(Ordering::Relaxed),
            evaluated: counters.evaluated.load(Ordering::Relaxed),
            expansions,
            sync_ns: counters.sync_ns.load(Ordering::Relaxed),
            heaviest_node,
            heaviest_share,
        };
        self.sampler.add(&stats);
        self.stats.push(stats);
        self.wall_ns += wall_ns;
        self.cycle += 1;
        Ok(())
    }

    /// Compute time per node in the last cycle.
    pub fn node_ns(&self) -> Vec<u64> {
        self.monitor.node_ns(&self.tg, self.graph.len())
    }

    fn heaviest(&self) -> (String, f64) {
        let ns = self.node_ns();
        let total: u64 = ns.iter().sum();
        match ns.iter().enumerate().max_by_key(|&(i, &t)| (t, std::cmp::Reverse(i))) {
            Some((i, &t)) if total > 0 => (self.graph.nodes[i].name.clone(), t as f64 / total as f64),
            _ => (String::new(), 0.0),
        }
    }

    /// Record first detections at the outputs; returns the newly detected.
    fn strobe(&mut self, cycle: u32) -> Vec<FaultId> {
        let mut newly = Vec::new();
        for &o in &self.graph.outputs {
            for b in &self.states[o.index()].get_mut().bads {
                if let Some(&p) = self.fid_pos.get(&b.fid) {
                    if self.detect[p].is_none() {
                        self.detect[p] = Some((cycle, o));
                        newly.push(b.fid);
                    }
                }
            }
        }
        newly
    }

    fn drop_faults(&mut self, fids: &[FaultId]) {
        let gone: HashSet<FaultId> = fids.iter().copied().collect();
        for &f in fids {
            self.table.retire(f);
        }
        for s in &mut self.states {
            s.get_mut().bads.retain(|b| !gone.contains(&b.fid));
        }
    }

    /// Re-evaluate every node against this cycle's inputs (registers at
    /// their pre-sync values) and require that nothing changes.
    fn check_steady_state(&self) -> Result<(), String> {
        let view = |id: NodeId| -> NodeState {
            if matches!(self.graph.node(id).kind, NodeKind::Reg { .. }) {
                self.snaps[id.index()].lock().clone().expect("register snapshot")
            } else {
                self.states[id.index()].read().clone()
            }
        };
        for &id in &self.graph.topo {
            let node = self.graph.node(id);
            if !node.kind.is_evaluated() {
                continue;
            }
            let fanins: Vec<NodeState> = node.fanin.iter().map(|&f| view(f)).collect();
            let refs: Vec<&NodeState> = fanins.iter().collect();
            let own = self.states[id.index()].read().clone();
            let d = evaluate(node, &refs, &own, self.table.at(id), self.cycle);
            if d.new_good != own.good || d.new_bads != own.bads {
                return Err(format!("node `{}` changes on re-evaluation", node.name));
            }
        }
        for &r in &self.graph.regs {
            let node = self.graph.node(r);
            let before = view(r);
            let next = node.next_src.map(view).unwrap_or_else(|| before.clone());
            let expect = sync_register(node, &before, &next, self.table.at(r), self.cycle + 1);
            let have = self.states[r.index()].read();
            if expect.good != have.good || expect.bads != have.bads {
                return Err(format!("register `{}` committed an unexpected value", node.name));
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> SimulationReport {
        self.sampler.close();
        let records = self
            .faults
            .iter()
            .zip(&self.detect)
            .map(|(f, d)| FaultRecord {
                fid: f.fid,
                location_kind: f.location.kind_str().to_string(),
                location_name: f.location.name(&self.graph).to_string(),
                bit: f.bit,
                fault_kind: f.kind,
                verdict: if d.is_some() { Verdict::Detected } else { Verdict::Undetected },
                detect_cycle: d.map(|d| d.0),
                observing_output: d.map(|d| self.graph.node(d.1).name.clone()),
            })
            .collect();
        SimulationReport {
            records,
            cycles: self.cycle,
            config: self.config.echo(),
            cycle_stats: self.stats,
            utilization: self.sampler.done,
            audit_violations: self.audit_violations,
            expanded_nodes: self.expanded,
            wall_ns: self.wall_ns,
        }
    }
}

/// Run all stimulus rows and report per-fault verdicts.
pub fn run_simulation(
    graph: &RtlGraph,
    faults: &[FaultDescriptor],
    stimulus: &Stimulus,
    config: &SimConfig,
) -> Result<SimulationReport, SimError> {
    run_simulation_observed(graph, faults, stimulus, config, |_, _| {})
}

/// As [`run_simulation`], calling `observer(cycle, states)` after every
/// cycle with the committed state of every node.
pub fn run_simulation_observed(
    graph: &RtlGraph,
    faults: &[FaultDescriptor],
    stimulus: &Stimulus,
    config: &SimConfig,
    mut observer: impl FnMut(u32, &Simulator),
) -> Result<SimulationReport, SimError> {
    let rows = stimulus.bind(graph)?;
    let mut sim = Simulator::new(graph, faults, config)?;
    for row in &rows {
        sim.step(row)?;
        observer(sim.cycle - 1, &sim);
    }
    Ok(sim.finish())
}
