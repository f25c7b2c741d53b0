//! One PASS/FAIL line per acceptance criterion.
//!
//! Exact criteria failing makes the process exit non-zero. Wall-clock
//! criteria are reported the same way but only fail the run with
//! `ACCEPTANCE_STRICT=1`, since they depend on the host's core count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtl_fsim::ablation::{ablation_run, AblationOptions, AblationTable};
use rtl_fsim::bench::{gen_bench_with, Bench, BenchOptions, Profile};
use rtl_fsim::fault::FaultKind;
use rtl_fsim::oracle::{run_serial_concurrent, single_fault_verdicts};
use rtl_fsim::sched::{run_simulation, Mode, SimConfig};

const FUZZ_CIRCUITS: usize = 210;
const FUZZ_MAX_NODES: usize = 200;
const FUZZ_MAX_FAULTS: usize = 64;
const FUZZ_MAX_CYCLES: usize = 50;
const FUZZ_WORKERS: [usize; 4] = [1, 2, 4, 8];
const DETERMINISM_RUNS: usize = 5;
const PRUNING_MIN_SKIP: f64 = 0.90;
const SKEWED_SIZE: usize = 2000;
const SKEWED_MAX_RATIO: f64 = 0.67;
const PIPELINE_MAX_RATIO: f64 = 0.90;
const SCALING_MIN_SPEEDUP: f64 = 3.0;
const SCALING_NOISE: f64 = 0.05;
const OVERHEAD_MAX: f64 = 0.15;
const AUDIT_MIN_CYCLES: u64 = 10_000;
const TIMING_REPEATS: usize = 3;

struct Outcome {
    name: &'static str,
    pass: bool,
    exact: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let kind = if o.exact { "exact" } else { "timing" };
    println!("{tag} [{kind}] {}: {}", o.name, o.detail);
}

fn fuzz_bench(i: usize, rng: &mut ChaCha8Rng) -> Bench {
    let profile = Profile::ALL[i % 3];
    let size = rng.random_range(10..=FUZZ_MAX_NODES * 3 / 4);
    let cycles = rng.random_range(4..=FUZZ_MAX_CYCLES);
    let t = rng.random_range(0..cycles as u32);
    let kinds = vec![FaultKind::Sa0, FaultKind::Sa1, FaultKind::Transient { start: t, end: t + rng.random_range(0..3) }];
    let opts = BenchOptions { cycles, kinds, max_faults: Some(FUZZ_MAX_FAULTS), ..Default::default() };
    gen_bench_with(profile, size, rng.random(), &opts).expect("valid fuzz size")
}

/// Oracle equivalence and structural audits over the same fuzz schedules.
fn oracle_and_audit() -> [Outcome; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = Vec::new();
    let mut audited_cycles = 0u64;
    let mut violations = 0u64;
    let mut errors = Vec::new();
    let mut largest = 0;
    for i in 0..FUZZ_CIRCUITS {
        let b = fuzz_bench(i, &mut rng);
        largest = largest.max(b.graph.len());
        assert!(b.graph.len() <= FUZZ_MAX_NODES && b.faults.len() <= FUZZ_MAX_FAULTS);
        let single = single_fault_verdicts(&b.graph, &b.faults, &b.stimulus).expect("oracle");
        let serial = run_serial_concurrent(&b.graph, &b.faults, &b.stimulus).expect("oracle").verdicts();
        if serial != single {
            mismatches.push(format!("circuit {i}: concurrent oracle vs single-fault"));
        }
        for mode in Mode::PARALLEL {
            for p in FUZZ_WORKERS {
                let cfg = SimConfig { audit: true, ..SimConfig::new(mode, p) };
                match run_simulation(&b.graph, &b.faults, &b.stimulus, &cfg) {
                    Ok(r) => {
                        audited_cycles += u64::from(r.cycles);
                        violations += r.audit_violations;
                        if r.verdicts() != single {
                            mismatches.push(format!("circuit {i} {mode} P={p}"));
                        }
                    }
                    Err(e) => errors.push(format!("circuit {i} {mode} P={p}: {e}")),
                }
            }
        }
    }
    let oracle = Outcome {
        name: "oracle equivalence",
        pass: mismatches.is_empty() && errors.is_empty(),
        exact: true,
        detail: format!(
            "{FUZZ_CIRCUITS} circuits (largest {largest} nodes), 3 modes x P in {FUZZ_WORKERS:?}: {} mismatches {}",
            mismatches.len(),
            mismatches.first().cloned().unwrap_or_default()
        ),
    };
    let audit = Outcome {
        name: "structural invariants",
        pass: errors.is_empty() && violations == 0 && audited_cycles >= AUDIT_MIN_CYCLES,
        exact: true,
        detail: format!(
            "{audited_cycles} audited cycles (need >= {AUDIT_MIN_CYCLES}), {violations} violations, {} errors {}",
            errors.len(),
            errors.first().cloned().unwrap_or_default()
        ),
    };
    [oracle, audit]
}

fn determinism() -> Outcome {
    let mut distinct = 0;
    let mut checked = Vec::new();
    for (profile, seed) in [(Profile::Uniform, 21), (Profile::Skewed, 22), (Profile::Pipeline, 23)] {
        let opts = BenchOptions { cycles: 40, max_faults: Some(64), ..Default::default() };
        let b = gen_bench_with(profile, 200, seed, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files: Vec<Vec<u8>> = (0..DETERMINISM_RUNS)
            .map(|k| {
                let r = run_simulation(&b.graph, &b.faults, &b.stimulus, &SimConfig::new(Mode::Full, 8)).unwrap();
                let path = dir.path().join(format!("report{k}.csv"));
                std::fs::write(&path, r.to_csv()).unwrap();
                std::fs::read(&path).unwrap()
            })
            .collect();
        if files.iter().any(|f| f != &files[0]) {
            distinct += 1;
        }
        checked.push(profile.as_str());
    }
    Outcome {
        name: "determinism",
        pass: distinct == 0,
        exact: true,
        detail: format!("{DETERMINISM_RUNS} runs at P=8 on {checked:?}: {distinct} differing instances"),
    }
}

fn pruning() -> Outcome {
    let opts = BenchOptions { cycles: 40, quiescent: true, ..Default::default() };
    let b = gen_bench_with(Profile::Uniform, 500, 5, &opts).unwrap();
    let r = run_simulation(&b.graph, &b.faults, &b.stimulus, &SimConfig::new(Mode::Full, 2)).unwrap();
    let ratio = r.skipped_ratio_from(2);
    Outcome {
        name: "pruning effectiveness",
        pass: ratio > PRUNING_MIN_SKIP,
        exact: true,
        detail: format!("skipped ratio from cycle 2 = {ratio:.4} (need > {PRUNING_MIN_SKIP}), {} faults", b.faults.len()),
    }
}

fn sweep(b: &Bench, workers: Vec<usize>, modes: Vec<Mode>) -> AblationTable {
    let opts = AblationOptions { workers, modes, repeats: TIMING_REPEATS, ..Default::default() };
    let t = ablation_run(&b.graph, &b.stimulus, &b.faults, &opts).expect("ablation");
    assert!(t.verdicts_equal, "ablation cells disagree on verdicts");
    t
}

fn wall(t: &AblationTable, mode: Mode, p: usize) -> f64 {
    t.row(mode, p).expect("cell").wall_ns as f64
}

fn timing(cores: usize) -> Vec<Outcome> {
    let skewed = gen_bench_with(Profile::Skewed, SKEWED_SIZE, 1, &BenchOptions::default()).unwrap();
    let pipeline =
        gen_bench_with(Profile::Pipeline, SKEWED_SIZE, 2, &BenchOptions { max_faults: Some(8000), ..Default::default() }).unwrap();
    let uniform = gen_bench_with(Profile::Uniform, 1000, 3, &BenchOptions { max_faults: Some(4000), ..Default::default() }).unwrap();
    let note = format!("host has {cores} core(s)");

    let ts = sweep(&skewed, vec![1, 2, 4, 8], Mode::PARALLEL.to_vec());
    let ratio = wall(&ts, Mode::Full, 8) / wall(&ts, Mode::Structural, 8);
    let two_d = Outcome {
        name: "two-dimensional parallelism",
        pass: ratio <= SKEWED_MAX_RATIO,
        exact: false,
        detail: format!(
            "skewed {} nodes / {} faults, full/structural wall at P=8 = {ratio:.3} (need <= {SKEWED_MAX_RATIO}); {note}",
            skewed.graph.len(),
            skewed.faults.len()
        ),
    };
    let speedups: Vec<f64> = [1, 2, 4, 8].iter().map(|&p| ts.row(Mode::Full, p).unwrap().speedup_vs_first).collect();
    let monotone = speedups.windows(2).all(|w| w[1] >= w[0] * (1.0 - SCALING_NOISE));
    let scaling = Outcome {
        name: "scalability trend",
        pass: speedups[3] >= SCALING_MIN_SPEEDUP && monotone,
        exact: false,
        detail: format!(
            "full-mode speedup over P=1 at P=1,2,4,8 = {:?} (need >= {SCALING_MIN_SPEEDUP} at 8, monotone within {SCALING_NOISE}); {note}",
            speedups.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    };

    let tp = sweep(&pipeline, vec![8], Mode::PARALLEL.to_vec());
    let pratio = wall(&tp, Mode::Full, 8) / wall(&tp, Mode::StructuralFault, 8);
    let unified = Outcome {
        name: "unified-schedule benefit",
        pass: pratio <= PIPELINE_MAX_RATIO,
        exact: false,
        detail: format!(
            "pipeline {} nodes / {} regs, full/structural+fault wall at P=8 = {pratio:.3} (need <= {PIPELINE_MAX_RATIO}); {note}",
            pipeline.graph.len(),
            pipeline.graph.regs.len()
        ),
    };

    let tu = sweep(&uniform, vec![8], Mode::PARALLEL.to_vec());
    let overheads = [("skewed", ts.max_overhead()), ("pipeline", tp.max_overhead()), ("uniform", tu.max_overhead())];
    let worst = overheads.iter().map(|o| o.1).fold(0.0, f64::max);
    let overhead = Outcome {
        name: "overhead bound",
        pass: worst < OVERHEAD_MAX,
        exact: false,
        detail: format!(
            "added-task overhead fraction {:?} (need < {OVERHEAD_MAX})",
            overheads.iter().map(|(n, f)| format!("{n}={f:.4}")).collect::<Vec<_>>()
        ),
    };
    vec![two_d, unified, scaling, overhead]
}

fn main() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let t0 = Instant::now();
    let mut outcomes = Vec::new();
    let [oracle, audit] = oracle_and_audit();
    outcomes.push(oracle);
    outcomes.push(determinism());
    outcomes.push(pruning());
    outcomes.extend(timing(cores));
    outcomes.push(audit);
    println!("acceptance ({cores} cores, {:.1}s)", t0.elapsed().as_secs_f64());
    for o in &outcomes {
        line(o);
    }
    let failed_exact = outcomes.iter().filter(|o| o.exact && !o.pass).count();
    let failed_timing = outcomes.iter().filter(|o| !o.exact && !o.pass).count();
    println!("{} passed, {failed_exact} exact failures, {failed_timing} timing failures", outcomes.len() - failed_exact - failed_timing);
    if failed_exact > 0 || (strict && failed_timing > 0) {
        std::process::exit(1);
    }
}
