//! Command-line front end. Exit status: 0 ok, 1 usage, 2 input parse,
//! 3 simulation invariant, 4 oracle mismatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ablation::{ablation_run, AblationOptions};
use crate::bench::{gen_bench_with, BenchOptions, Profile};
use crate::fault::{generate_fault_list, parse_fault_csv, parse_kind_list, write_fault_csv, FaultDescriptor};
use crate::netlist::{load_netlist, RtlGraph};
use crate::oracle::{run_serial_concurrent, single_fault_verdicts};
use crate::sched::{run_simulation, Mode, SimConfig, SimError, Simulator};
use crate::stimulus::{parse_stimulus, Stimulus};

#[derive(Debug, Parser)]
#[command(name = "rtl-fsim", version, about = "Parallel concurrent fault simulator for RTL netlists")]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic benchmark: netlist, stimulus and fault list.
    GenBench(GenBenchArgs),
    /// Sweep modes and worker counts.
    Ablation(AblationArgs),
    /// Print the task graph in DOT.
    DumpTaskGraph(DumpArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long, required = true)]
    netlist: Option<PathBuf>,
    #[arg(long, required = true)]
    stimulus: Option<PathBuf>,
    /// Fault list CSV.
    #[arg(long, conflicts_with = "gen_faults")]
    faults: Option<PathBuf>,
    /// Enumerate faults of these kinds, e.g. `sa0,sa1,transient:2:5`.
    #[arg(long)]
    gen_faults: Option<String>,
    /// Keep a seeded random subset of the generated faults.
    #[arg(long, requires = "gen_faults")]
    max_faults: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long, default_value = "full")]
    mode: String,
    #[arg(long, default_value_t = 0.0001)]
    threshold: f64,
    #[arg(long)]
    slaves: Option<usize>,
    #[arg(long, default_value_t = 8)]
    max_expansions: usize,
    #[arg(long)]
    drop_on_detect: bool,
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    steady_state_check: bool,
    #[arg(long)]
    no_skip: bool,
    /// Utilization sampling window in milliseconds.
    #[arg(long, default_value_t = 100)]
    window_ms: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Report CSV path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Also run both reference simulators and compare verdicts.
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Debug, Args)]
struct GenBenchArgs {
    #[arg(long)]
    profile: String,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    cycles: usize,
    #[arg(long)]
    max_faults: Option<usize>,
    #[arg(long, default_value = "sa0,sa1")]
    kinds: String,
    /// Random first row, constant afterwards.
    #[arg(long)]
    quiescent: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AblationArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Directory for speedup.csv, utilization.csv and overhead.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    faults: Option<PathBuf>,
    #[arg(long)]
    gen_faults: Option<String>,
    #[arg(long, default_value = "full")]
    mode: String,
    /// Nodes to split into master and slaves.
    #[arg(long, value_delimiter = ',')]
    expand: Vec<String>,
    #[arg(long, default_value_t = 2)]
    slaves: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invariant(String),
    #[error("oracle mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Mismatch(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invariant { .. } | SimError::Deadlock { .. } => CliError::Invariant(e.to_string()),
            SimError::Config(_) | SimError::TaskGraph(_) => CliError::Usage(e.to_string()),
            SimError::Stimulus(_) | SimError::Fault(_) | SimError::RowWidth { .. } => CliError::Parse(e.to_string()),
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        None => run(&cli.run),
        Some(Command::GenBench(a)) => gen_bench_cmd(&a),
        Some(Command::Ablation(a)) => ablation_cmd(&a),
        Some(Command::DumpTaskGraph(a)) => dump_cmd(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<RtlGraph, CliError> {
    load_netlist(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_faults(graph: &RtlGraph, file: Option<&Path>, kinds: Option<&str>) -> Result<Vec<FaultDescriptor>, CliError> {
    match (file, kinds) {
        (Some(p), _) => parse_fault_csv(&read(p)?, graph).map_err(|e| CliError::Parse(format!("{}: {e}", p.display()))),
        (None, Some(k)) => {
            let kinds = parse_kind_list(k).map_err(|e| CliError::Usage(e.to_string()))?;
            generate_fault_list(graph, &kinds).map_err(|e| CliError::Usage(e.to_string()))
        }
        (None, None) => Ok(Vec::new()),
    }
}

fn load_inputs(a: &InputArgs) -> Result<(RtlGraph, Stimulus, Vec<FaultDescriptor>), CliError> {
    let netlist = a.netlist.as_deref().ok_or_else(|| CliError::Usage("--netlist is required".into()))?;
    let stim_path = a.stimulus.as_deref().ok_or_else(|| CliError::Usage("--stimulus is required".into()))?;
    if a.faults.is_none() && a.gen_faults.is_none() {
        return Err(CliError::Usage("one of --faults or --gen-faults is required".into()));
    }
    let graph = load_graph(netlist)?;
    let stimulus = parse_stimulus(&read(stim_path)?).map_err(|e| CliError::Parse(format!("{}: {e}", stim_path.display())))?;
    let mut faults = load_faults(&graph, a.faults.as_deref(), a.gen_faults.as_deref())?;
    if let Some(k) = a.max_faults.filter(|&k| k < faults.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let mut keep = sample(&mut rng, faults.len(), k).into_vec();
        keep.sort_unstable();
        faults = keep.into_iter().map(|i| faults[i].clone()).collect();
    }
    Ok((graph, stimulus, faults))
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    s.parse().map_err(|e: SimError| CliError::Usage(e.to_string()))
}

fn engine_config(e: &EngineArgs, workers: usize) -> Result<SimConfig, CliError> {
    Ok(SimConfig {
        workers,
        mode: parse_mode(&e.mode)?,
        threshold: e.threshold,
        slaves: e.slaves,
        max_expansions_per_cycle: e.max_expansions,
        drop_on_detect: e.drop_on_detect,
        steady_state_check: e.steady_state_check,
        audit: e.audit,
        no_skip: e.no_skip,
        utilization_window_ns: e.window_ms.max(1) * 1_000_000,
        ..SimConfig::default()
    })
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let (graph, stimulus, faults) = load_inputs(&a.input)?;
    let config = engine_config(&a.engine, a.workers)?;
    let report = run_simulation(&graph, &faults, &stimulus, &config)?;
    match &a.report {
        Some(p) => write(p, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    if let Some(p) = &a.stats {
        write(p, &report.stats_toml())?;
    }
    eprintln!(
        "coverage {:.4} ({}/{}) over {} cycles, mode {}, {} workers",
        report.coverage(),
        report.detected(),
        report.records.len(),
        report.cycles,
        config.mode,
        config.workers
    );
    if a.oracle_check {
        let got = report.verdicts();
        let serial = run_serial_concurrent(&graph, &faults, &stimulus)?.verdicts();
        if let Some(i) = (0..got.len()).find(|&i| got[i] != serial[i]) {
            return Err(CliError::Mismatch(format!("fault {} engine {:?} serial oracle {:?}", got[i].0, got[i].1, serial[i].1)));
        }
        let single = single_fault_verdicts(&graph, &faults, &stimulus)?;
        if let Some(i) = (0..got.len()).find(|&i| got[i] != single[i]) {
            return Err(CliError::Mismatch(format!("fault {} engine {:?} single-fault oracle {:?}", got[i].0, got[i].1, single[i].1)));
        }
        eprintln!("oracle check passed for {} faults", got.len());
    }
    Ok(())
}

fn gen_bench_cmd(a: &GenBenchArgs) -> Result<(), CliError> {
    let profile: Profile = a.profile.parse().map_err(|e: crate::bench::BenchError| CliError::Usage(e.to_string()))?;
    let kinds = parse_kind_list(&a.kinds).map_err(|e| CliError::Usage(e.to_string()))?;
    let opts = BenchOptions { cycles: a.cycles, kinds, max_faults: a.max_faults, toggle: None, quiescent: a.quiescent };
    let b = gen_bench_with(profile, a.size, a.seed, &opts).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::Usage(format!("{}: {e}", a.out_dir.display())))?;
    let stem = format!("{profile}_{}_{}", a.size, a.seed);
    let files = [
        (format!("{stem}.rtl"), b.netlist.clone()),
        (format!("{stem}.stim"), b.stimulus.to_text()),
        (format!("{stem}.faults.csv"), write_fault_csv(&b.faults, &b.graph)),
    ];
    for (name, text) in files {
        let p = a.out_dir.join(name);
        write(&p, &text)?;
        println!("{}", p.display());
    }
    Ok(())
}

fn ablation_cmd(a: &AblationArgs) -> Result<(), CliError> {
    let (graph, stimulus, faults) = load_inputs(&a.input)?;
    if a.workers_list.is_empty() || a.workers_list.contains(&0) {
        return Err(CliError::Usage("--workers-list needs positive counts".into()));
    }
    let base = engine_config(&a.engine, 1)?;
    let opts = AblationOptions { workers: a.workers_list.clone(), repeats: a.repeats, base, ..Default::default() };
    let table = ablation_run(&graph, &stimulus, &faults, &opts)?;
    print!("{}", table.speedup_csv());
    println!();
    print!("{}", table.overhead_csv());
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        write(&dir.join("speedup.csv"), &table.speedup_csv())?;
        write(&dir.join("utilization.csv"), &table.utilization_csv())?;
        write(&dir.join("overhead.csv"), &table.overhead_csv())?;
    }
    if !table.verdicts_equal {
        return Err(CliError::Mismatch("verdicts differ between ablation cells".into()));
    }
    Ok(())
}

fn dump_cmd(a: &DumpArgs) -> Result<(), CliError> {
    let graph = load_graph(&a.netlist)?;
    let faults = load_faults(&graph, a.faults.as_deref(), a.gen_faults.as_deref())?;
    let config = SimConfig { mode: parse_mode(&a.mode)?, slaves: Some(a.slaves), pre_expand: a.expand.clone(), ..SimConfig::default() };
    let sim = Simulator::new(&graph, &faults, &config)?;
    let dot = sim.task_graph().to_dot(sim.graph());
    match &a.out {
        Some(p) => write(p, &dot),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}
