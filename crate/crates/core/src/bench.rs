//! Seeded synthetic benchmarks: netlist text, stimulus and fault list.
//!
//! * `uniform`: random combinational DAG with pipeline and hold registers.
//! * `skewed`: a lightly driven random region whose sinks are XOR-reduced
//!   into one accumulator adder, so nearly every fault's bad gates pile up
//!   on a single node.
//! * `pipeline`: register stages, at least a quarter of all nodes are
//!   registers.

use std::fmt;
use std::fmt::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fault::{generate_fault_list, FaultDescriptor, FaultKind};
use crate::netlist::{load_netlist, mask, RtlGraph};
use crate::stimulus::Stimulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    Uniform,
    Skewed,
    Pipeline,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Uniform, Profile::Skewed, Profile::Pipeline];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Uniform => "uniform",
            Profile::Skewed => "skewed",
            Profile::Pipeline => "pipeline",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Profile::Uniform),
            "skewed" => Ok(Profile::Skewed),
            "pipeline" => Ok(Profile::Pipeline),
            _ => Err(BenchError::Profile(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("benchmark size must be at least 10, got {0}")]
    Size(usize),
    #[error("unknown benchmark profile `{0}`")]
    Profile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub cycles: usize,
    pub kinds: Vec<FaultKind>,
    /// Uniformly sampled subset of the full fault list.
    pub max_faults: Option<usize>,
    /// Per-cycle probability that an input takes a new random value; the
    /// profile picks a default when unset.
    pub toggle: Option<f64>,
    /// Row 0 random, every later row identical.
    pub quiescent: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            cycles: 32,
            kinds: vec![FaultKind::Sa0, FaultKind::Sa1],
            max_faults: None,
            toggle: None,
            quiescent: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bench {
    pub profile: Profile,
    pub seed: u64,
    pub netlist: String,
    pub graph: RtlGraph,
    pub stimulus: Stimulus,
    pub faults: Vec<FaultDescriptor>,
}

pub fn gen_bench(profile: Profile, size: usize, seed: u64) -> Result<Bench, BenchError> {
    gen_bench_with(profile, size, seed, &BenchOptions::default())
}

pub fn gen_bench_with(profile: Profile, size: usize, seed: u64, opts: &BenchOptions) -> Result<Bench, BenchError> {
    if size < 10 {
        return Err(BenchError::Size(size));
    }
    let salt = match profile {
        Profile::Uniform => 0x75,
        Profile::Skewed => 0x73,
        Profile::Pipeline => 0x70,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(8) ^ salt);
    let name = format!("{profile}_{size}_{seed}");
    let (netlist, toggle) = match profile {
        Profile::Uniform => (uniform(&mut rng, size, &name), 0.5),
        Profile::Skewed => (skewed(&mut rng, size, &name), 0.0),
        Profile::Pipeline => (pipeline(&mut rng, size, &name), 0.5),
    };
    let graph = load_netlist(&netlist).expect("generated netlist elaborates");
    // the skewed region sees about one input change every four cycles
    let toggle = if profile == Profile::Skewed { (0.25 / graph.inputs.len() as f64).min(0.5) } else { toggle };
    let stimulus = random_stimulus(&mut rng, &graph, opts.cycles, opts.toggle.unwrap_or(toggle), opts.quiescent);
    let mut faults = generate_fault_list(&graph, &opts.kinds).expect("non-empty kind set");
    if let Some(k) = opts.max_faults.filter(|&k| k < faults.len()) {
        let mut keep = sample(&mut rng, faults.len(), k).into_vec();
        keep.sort_unstable();
        faults = keep.into_iter().map(|i| faults[i].clone()).collect();
    }
    Ok(Bench { profile, seed, netlist, graph, stimulus, faults })
}

fn random_stimulus(rng: &mut ChaCha8Rng, graph: &RtlGraph, cycles: usize, toggle: f64, quiescent: bool) -> Stimulus {
    let widths: Vec<u32> = graph.inputs.iter().map(|&i| graph.node(i).width).collect();
    let fresh = |rng: &mut ChaCha8Rng| -> Vec<u64> { widths.iter().map(|&w| rng.random::<u64>() & mask(w)).collect() };
    let mut rows = Vec::with_capacity(cycles);
    let mut row = fresh(rng);
    for c in 0..cycles {
        if c > 0 {
            if quiescent {
                if c == 1 {
                    row = fresh(rng);
                }
            } else {
                for (v, &w) in row.iter_mut().zip(&widths) {
                    if rng.random_bool(toggle) {
                        *v = rng.random::<u64>() & mask(w);
                    }
                }
            }
        }
        rows.push(row.clone());
    }
    Stimulus { inputs: graph.inputs.iter().map(|&i| graph.node(i).name.clone()).collect(), rows }
}

#[derive(Debug, Clone)]
struct Net {
    name: String,
    width: u32,
}

/// Emits netlist text while tracking net widths and consumer counts.
struct Builder {
    decls: String,
    nexts: String,
    nets: Vec<Net>,
    uses: Vec<usize>,
    counter: usize,
}

impl Builder {
    fn new(module: &str) -> Self {
        Builder { decls: format!("module {module}\n"), nexts: String::new(), nets: Vec::new(), uses: Vec::new(), counter: 0 }
    }

    fn net(&mut self, prefix: &str, width: u32) -> usize {
        let name = format!("{prefix}{}", self.counter);
        self.counter += 1;
        self.nets.push(Net { name, width });
        self.uses.push(0);
        self.nets.len() - 1
    }

    fn input(&mut self, width: u32) -> usize {
        let i = self.net("i", width);
        writeln!(self.decls, "input {} {width}", self.nets[i].name).unwrap();
        i
    }

    fn reg(&mut self, width: u32, init: u64) -> usize {
        let i = self.net("r", width);
        writeln!(self.decls, "reg {} {width} = {init:x}", self.nets[i].name).unwrap();
        i
    }

    fn assign(&mut self, width: u32, op: &str, args: &[Arg]) -> usize {
        let i = self.net("w", width);
        write!(self.decls, "assign {} {width} = {op}", self.nets[i].name).unwrap();
        for a in args {
            match *a {
                Arg::Net(n) => {
                    self.uses[n] += 1;
                    write!(self.decls, " {}", self.nets[n].name).unwrap();
                }
                Arg::Lit(v, w) => write!(self.decls, " #{v:x}:{w}").unwrap(),
                Arg::Param(p) => write!(self.decls, " {p}").unwrap(),
            }
        }
        self.decls.push('\n');
        i
    }

    fn next(&mut self, reg: usize, src: usize) {
        self.uses[src] += 1;
        writeln!(self.nexts, "next {} = {}", self.nets[reg].name, self.nets[src].name).unwrap();
    }

    fn output(&mut self, src: usize) {
        let n = &self.nets[src];
        writeln!(self.decls, "output o_{} {} = {}", n.name, n.width, n.name).unwrap();
        self.uses[src] += 1;
    }

    fn finish(mut self) -> String {
        self.decls.push_str(&self.nexts);
        self.decls.push_str("end\n");
        self.decls
    }
}

#[derive(Debug, Clone, Copy)]
enum Arg {
    Net(usize),
    Lit(u64, u32),
    Param(u32),
}

/// Pools of nets a random node may read: data nets of width `w` and 1-bit
/// nets usable as selects.
struct Pools {
    data: Vec<usize>,
    bits: Vec<usize>,
}

impl Pools {
    fn pick(rng: &mut ChaCha8Rng, from: &[usize]) -> usize {
        // favour recent nets so the graph gains depth
        let recent = from.len().min(24);
        if rng.random_bool(0.7) {
            from[from.len() - 1 - rng.random_range(0..recent)]
        } else {
            from[rng.random_range(0..from.len())]
        }
    }
}

/// One random node over `pools`; appended to the matching pool.
fn random_node(b: &mut Builder, rng: &mut ChaCha8Rng, pools: &mut Pools, w: u32, allow_mul: bool) -> usize {
    let a = Arg::Net(Pools::pick(rng, &pools.data));
    let c = Arg::Net(Pools::pick(rng, &pools.data));
    let roll = rng.random_range(0..100);
    let id = match roll {
        0..=7 => b.assign(w, "NOT", &[a]),
        8..=21 => b.assign(w, "AND", &[a, c]),
        22..=35 => b.assign(w, "OR", &[a, c]),
        36..=53 => b.assign(w, "XOR", &[a, c]),
        54..=63 => b.assign(w, "ADD", &[a, c]),
        64..=69 => b.assign(w, "SUB", &[a, c]),
        70..=79 if !pools.bits.is_empty() => {
            let s = Arg::Net(Pools::pick(rng, &pools.bits));
            b.assign(w, "MUX", &[s, a, c])
        }
        80..=85 => {
            let op = if rng.random_bool(0.5) { "SHL" } else { "SHR" };
            b.assign(w, op, &[a, Arg::Lit(rng.random_range(1..4), 3)])
        }
        86..=90 => {
            let op = if rng.random_bool(0.5) { "EQ" } else { "LT" };
            let id = b.assign(1, op, &[a, c]);
            pools.bits.push(id);
            return id;
        }
        91..=95 => {
            let bit = rng.random_range(0..w);
            let id = b.assign(1, "SLICE", &[Arg::Param(bit), Arg::Param(bit), a]);
            pools.bits.push(id);
            return id;
        }
        96..=97 if allow_mul => b.assign(w, "MUL", &[a, c]),
        _ => b.assign(w, "XOR", &[a, Arg::Lit(rng.random::<u64>() & mask(w), w)]),
    };
    pools.data.push(id);
    id
}

fn sinks(b: &Builder) -> Vec<usize> {
    (0..b.nets.len()).filter(|&i| b.uses[i] == 0).collect()
}

fn uniform(rng: &mut ChaCha8Rng, size: usize, module: &str) -> String {
    const W: u32 = 8;
    let mut b = Builder::new(module);
    let n_in = (size / 10).max(2);
    let n_reg = (size / 10).max(1);
    let inputs: Vec<usize> = (0..n_in).map(|_| b.input(W)).collect();
    let mut pools = Pools { data: inputs.clone(), bits: Vec::new() };
    let regs: Vec<usize> = (0..n_reg).map(|_| b.reg(W, rng.random::<u64>() & mask(W))).collect();
    let remaining = size.saturating_sub(n_in + n_reg).max(4);
    // register-independent layer first, so every register settles
    let layer_a = (remaining / 3).max(2);
    for _ in 0..layer_a {
        random_node(&mut b, rng, &mut pools, W, true);
    }
    let a_data = pools.data.clone();
    let a_bits = pools.bits.clone();
    let mut hold = 0;
    for &r in &regs {
        let src = Pools::pick(rng, &a_data[n_in.min(a_data.len() - 1)..]);
        if !a_bits.is_empty() && rng.random_bool(0.4) {
            let en = Pools::pick(rng, &a_bits);
            let m = b.assign(W, "MUX", &[Arg::Net(en), Arg::Net(src), Arg::Net(r)]);
            b.next(r, m);
            hold += 1;
        } else {
            b.next(r, src);
        }
    }
    pools.data.extend(&regs);
    for _ in 0..remaining.saturating_sub(layer_a + hold) {
        random_node(&mut b, rng, &mut pools, W, true);
    }
    for s in sinks(&b) {
        b.output(s);
    }
    b.finish()
}

fn skewed(rng: &mut ChaCha8Rng, size: usize, module: &str) -> String {
    const W: u32 = 16;
    const CLUSTER: usize = 10;
    let mut b = Builder::new(module);
    // independent clusters of two inputs and CLUSTER nodes keep each input's
    // cone small; about 14.5 nodes per cluster once the tree is counted
    let clusters = (size.saturating_sub(5) * 2 / 29).max(1);
    let per_cluster = CLUSTER.min(size.saturating_sub(7).max(1));
    for _ in 0..clusters {
        let inputs = vec![b.input(W), b.input(W)];
        let mut pools = Pools { data: inputs, bits: Vec::new() };
        for _ in 0..per_cluster {
            random_node(&mut b, rng, &mut pools, W, false);
        }
    }
    let mut level: Vec<usize> = sinks(&b)
        .into_iter()
        .map(|s| if b.nets[s].width == W { s } else { b.assign(W, "CONCAT", &[Arg::Lit(0, W - 1), Arg::Net(s)]) })
        .collect();
    while level.len() > 1 {
        let mut up = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            up.push(match *pair {
                [x, y] => b.assign(W, "XOR", &[Arg::Net(x), Arg::Net(y)]),
                [x] => x,
                _ => unreachable!(),
            });
        }
        level = up;
    }
    let x = level[0];
    let t = b.assign(W, "ADD", &[Arg::Net(x), Arg::Lit(1, W)]);
    let acc = b.reg(W, 0);
    let hot = b.assign(W, "ADD", &[Arg::Net(acc), Arg::Net(t)]);
    b.next(acc, hot);
    b.output(hot);
    b.finish()
}

fn pipeline(rng: &mut ChaCha8Rng, size: usize, module: &str) -> String {
    const W: u32 = 8;
    let mut b = Builder::new(module);
    let n_in = (size / 16).max(2);
    let stages = 8usize.min((size - n_in) / 4).max(1);
    let per_stage = (size - n_in).div_ceil(2 * stages + 1);
    let inputs: Vec<usize> = (0..n_in).map(|_| b.input(W)).collect();
    let mut prev = inputs.clone();
    for _ in 0..stages {
        let regs: Vec<usize> = (0..per_stage).map(|_| b.reg(W, rng.random::<u64>() & mask(W))).collect();
        for &r in &regs {
            let x = prev[rng.random_range(0..prev.len())];
            let y = if rng.random_bool(0.2) { inputs[rng.random_range(0..n_in)] } else { prev[rng.random_range(0..prev.len())] };
            let op = ["AND", "OR", "XOR", "ADD", "SUB", "XOR"][rng.random_range(0..6)];
            let c = b.assign(W, op, &[Arg::Net(x), Arg::Net(y)]);
            b.next(r, c);
        }
        prev = regs;
    }
    for s in sinks(&b) {
        b.output(s);
    }
    b.finish()
}
