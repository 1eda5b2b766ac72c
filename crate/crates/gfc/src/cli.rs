//! The `gfc` command line. Every report is plain text with a stable layout;
//! `--format tsv` gives a tab-separated variant. Seeds are echoed in the
//! header line so a report says how to reproduce itself.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bisim::{bisim_partition, stabilize};
use crate::election::{
    flooding, lcr, lcr_prime, message_stats, p2, p2_prime, ring_ids, ring_name, ring_topology, shuffled_ids,
    MessageStats,
};
use crate::epistemic::{build_system, distinct_id_rings, ring_universe, Clock, DeFactoReport, Policy};
use crate::network::{
    generate_family, parse_network, random_strongly_connected, FamilySpec, GlobalFunction, Network, NetworkFamily,
};
use crate::runtime::{full_information, pg_gc, run_protocol, Protocol, Run, RunError, Scheduler, Topology};
use crate::solvability::is_solvable;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSOLVABLE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "gfc", version, about = "Global function computation on labeled networks")]
pub struct Cli {
    /// Worker threads for work spread over networks or seeds (0: all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Tsv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether a function is computable on a family
    Check {
        #[command(flatten)]
        family: FamilyArgs,
        /// Global function: max_input, size, sum_inputs, multiset_inputs, diameter
        #[arg(long = "fn")]
        function: String,
    },
    /// Dump the k-bisimilarity partitions of a family
    Bisim {
        #[command(flatten)]
        family: FamilyArgs,
        /// Deepest level to print (default: the stabilization level)
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run a protocol on one network and write its trace
    Simulate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, value_enum)]
        protocol: ProtocolName,
        /// Function for pg_gc and full_info
        #[arg(long = "fn")]
        function: Option<String>,
        /// Family for pg_gc; the network itself is always a member
        #[command(flatten)]
        family: OptionalFamily,
        #[command(flatten)]
        sched: SchedArgs,
        /// Rounds for flooding and full_info (default: the diameter)
        #[arg(long)]
        rounds: Option<usize>,
        /// Rounds in sync mode, steps in async mode
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        /// Write the trace here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Message counts of the election protocols on random id rings
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "lcr,lcr_prime,p2,p2_prime")]
        protocols: Vec<ProtocolName>,
        #[arg(long, default_value_t = 3)]
        min_n: usize,
        #[arg(long, default_value_t = 10)]
        max_n: usize,
        /// Rings per size
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check an election protocol against the knowledge-based sending rule
    Verify {
        #[arg(long, value_enum)]
        protocol: ProtocolName,
        #[arg(long)]
        max_n: usize,
        #[arg(long, default_value_t = 2)]
        min_n: usize,
        /// Largest id (default: max-n)
        #[arg(long)]
        max_id: Option<u32>,
        /// Extra rings the agents consider possible, beyond the checked ids and sizes
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        /// Whether local states record the time
        #[arg(long, value_enum, default_value_t = ClockArg::Rounds)]
        clock: ClockArg,
        /// Asynchronous seeds run besides the synchronous run
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Enumerate a family into network files
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ProtocolName {
    PgGc,
    FullInfo,
    Lcr,
    LcrPrime,
    P2,
    P2Prime,
    Flooding,
}

impl ProtocolName {
    fn label(self) -> &'static str {
        match self {
            ProtocolName::PgGc => "pg_gc",
            ProtocolName::FullInfo => "full_info",
            ProtocolName::Lcr => "lcr",
            ProtocolName::LcrPrime => "lcr_prime",
            ProtocolName::P2 => "p2",
            ProtocolName::P2Prime => "p2_prime",
            ProtocolName::Flooding => "flooding",
        }
    }

    /// Ring protocols and the ring orientation they run on.
    fn ring(self) -> Option<bool> {
        match self {
            ProtocolName::Lcr | ProtocolName::LcrPrime => Some(false),
            ProtocolName::P2 | ProtocolName::P2Prime => Some(true),
            _ => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClockArg {
    Rounds,
    Free,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    UniRings,
    BiRings,
    /// Every input and weight labeling of the graph in --graph
    Labelings,
    /// Random strongly connected networks with distinct inputs
    Random,
    /// Just the files given with --member
    Files,
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyKind,
    #[command(flatten)]
    pub params: FamilyParams,
}

#[derive(Args, Debug, Clone)]
pub struct OptionalFamily {
    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    #[command(flatten)]
    pub params: FamilyParams,
}

#[derive(Args, Debug, Clone)]
pub struct FamilyParams {
    #[arg(long, default_value_t = 4)]
    pub max_n: usize,
    #[arg(long, value_delimiter = ',', default_value = "a,b")]
    pub inputs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub weights: Vec<String>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Network files added to the family
    #[arg(long = "member")]
    pub members: Vec<PathBuf>,
    /// Members of a random family
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Chance of each extra edge in a random family
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    /// Seed of a random family
    #[arg(long = "family-seed", default_value_t = 0)]
    pub family_seed: u64,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SchedArgs {
    /// Lock-step rounds (the default)
    #[arg(long, conflicts_with = "asynchronous")]
    pub sync: bool,
    /// Seeded asynchronous delivery; needs --seed
    #[arg(long = "async", requires = "seed")]
    pub asynchronous: bool,
    #[arg(long, requires = "asynchronous")]
    pub seed: Option<u64>,
    /// Async channels may reorder messages
    #[arg(long, requires = "asynchronous")]
    pub unordered: bool,
}

impl SchedArgs {
    fn scheduler(self) -> Scheduler {
        match (self.asynchronous, self.seed) {
            (true, Some(s)) if self.unordered => Scheduler::unordered_async(s),
            (true, Some(s)) => Scheduler::fifo_async(s),
            _ => Scheduler::sync(),
        }
    }

    fn describe(self) -> String {
        match (self.asynchronous, self.seed) {
            (true, Some(s)) => format!("async seed={s} fifo={}", !self.unordered),
            _ => "sync".to_string(),
        }
    }
}

/// A finished command: what to print and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> CliError {
        CliError::Input(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command, prints its output
/// and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(o) => {
            print!("{}", o.stdout);
            o.code
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build().map_err(CliError::input)?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let tsv = cli.format == Format::Tsv;
    match &cli.command {
        Command::Check { family, function } => check(family, function, tsv),
        Command::Bisim { family, k } => bisim(family, *k, tsv),
        Command::Simulate { net, protocol, function, family, sched, rounds, budget, out } => {
            let net = read_network(net)?;
            let (header, trace, ok) = simulate(&net, *protocol, function.as_deref(), family, *sched, *rounds, *budget)?;
            let text = format!("{header}\n{trace}");
            let stdout = match out {
                Some(path) => {
                    fs::write(path, &text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    format!("{header}\nwrote {}\n", path.display())
                }
                None => text,
            };
            Ok(Outcome { stdout, code: if ok { EXIT_OK } else { EXIT_FAILURE } })
        }
        Command::Bench { protocols, min_n, max_n, samples, seed } => {
            bench(protocols, *min_n, *max_n, *samples, *seed, tsv)
        }
        Command::Verify { protocol, max_n, min_n, max_id, horizon, clock, seeds } => {
            let max_id = max_id.unwrap_or(*max_n as u32);
            let clock = match clock {
                ClockArg::Rounds => Clock::Rounds,
                ClockArg::Free => Clock::Free,
            };
            let seeds_text: Vec<String> = seeds.iter().map(u64::to_string).collect();
            let header = format!(
                "# gfc verify protocol={} n={}..{} max_id={} horizon={} clock={} seeds={{{}}}\n",
                protocol.label(),
                min_n,
                max_n,
                max_id,
                horizon,
                match clock {
                    Clock::Rounds => "rounds",
                    Clock::Free => "free",
                },
                seeds_text.join(",")
            );
            let policy = Policy { seeds: seeds.clone(), clock, ..Policy::default() };
            let rep = verify(*protocol, *min_n..=*max_n, max_id, *horizon, policy)?;
            let code = if rep.ok() { EXIT_OK } else { EXIT_MISMATCH };
            let body = if tsv { verify_tsv(&rep) } else { rep.to_string() };
            Ok(Outcome { stdout: header + &body, code })
        }
        Command::Gen { family, out } => gen(family, out),
    }
}

fn read_network(path: &Path) -> Result<Network, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_network(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn function(name: &str) -> Result<GlobalFunction, CliError> {
    GlobalFunction::by_name(name).ok_or_else(|| {
        let known: Vec<String> = GlobalFunction::catalog().iter().map(|f| f.name().to_string()).collect();
        CliError::Usage(format!("unknown function {name:?}; known: {}", known.join(", ")))
    })
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// The family and a description for headers.
fn build_family(kind: FamilyKind, p: &FamilyParams, extra: &[Network]) -> Result<(NetworkFamily, String), CliError> {
    let mut files = extra.to_vec();
    for path in &p.members {
        files.push(read_network(path)?);
    }
    let (base, desc) = match kind {
        FamilyKind::UniRings | FamilyKind::BiRings => {
            let (ins, ws) = (strs(&p.inputs), strs(&p.weights));
            let spec = if kind == FamilyKind::UniRings {
                FamilySpec::uni_rings(p.max_n, &ins, &ws)
            } else {
                FamilySpec::bi_rings(p.max_n, &ins, &ws)
            };
            let fam = generate_family(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
            let desc = fam.description().to_string();
            (fam.members().to_vec(), desc)
        }
        FamilyKind::Labelings => {
            let path = p.graph.as_ref().ok_or_else(|| CliError::Usage("--family labelings needs --graph".into()))?;
            let graph = read_network(path)?;
            let spec = FamilySpec::labelings_of(graph, &strs(&p.inputs), &strs(&p.weights));
            let fam = generate_family(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
            let desc = format!("{} inputs={} weights={}", fam.description(), p.inputs.join(","), p.weights.join(","));
            (fam.members().to_vec(), desc)
        }
        FamilyKind::Random => {
            if p.max_n == 0 {
                return Err(CliError::Usage("--max-n must be positive".into()));
            }
            let ws = strs(&p.weights);
            let mut rng = ChaCha8Rng::seed_from_u64(p.family_seed);
            let mut nets = Vec::new();
            for i in 0..p.count {
                let n = rng.gen_range(1..=p.max_n);
                let seed = rng.gen();
                let net = random_strongly_connected(format!("rand{i}"), n, p.density, &ws, seed)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                nets.push(net);
            }
            let desc = format!(
                "random count={} n<={} density={} family_seed={}",
                p.count, p.max_n, p.density, p.family_seed
            );
            (nets, desc)
        }
        FamilyKind::Files => (Vec::new(), "files".to_string()),
    };
    let mut nets = base;
    nets.extend(files);
    let fam = NetworkFamily::new(desc.clone(), nets).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((fam, desc))
}

fn check(family: &FamilyArgs, fname: &str, tsv: bool) -> Result<Outcome, CliError> {
    let f = function(fname)?;
    let (fam, desc) = build_family(family.family, &family.params, &[])?;
    let report = is_solvable(&fam, &f).map_err(CliError::input)?;
    let mut out = format!("# gfc check family=\"{desc}\" members={} fn={}\n", fam.len(), f.name());
    if tsv {
        let _ = writeln!(out, "# solvable={} k_star={}", report.solvable, report.k_star);
        out.push_str("network\tn\tdiameter\tvalue\twitness\n");
        for (m, net) in fam.members().iter().enumerate() {
            let diam = net.diameter().map(|d| d.to_string()).unwrap_or_else(|_| "-".into());
            let value = f.eval(net).map_err(CliError::input)?;
            let w = report.witness_k(m).map(|k| k.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "{}\t{}\t{diam}\t{value}\t{w}", net.name(), net.len());
        }
    } else {
        out.push_str(&report.to_string());
    }
    let code = if report.solvable { EXIT_OK } else { EXIT_UNSOLVABLE };
    Ok(Outcome { stdout: out, code })
}

fn bisim(family: &FamilyArgs, k: Option<usize>, tsv: bool) -> Result<Outcome, CliError> {
    let (fam, desc) = build_family(family.family, &family.params, &[])?;
    let (k_star, _) = stabilize(&fam);
    let top = k.unwrap_or(k_star);
    let mut out = format!("# gfc bisim family=\"{desc}\" members={} k_star={k_star}\n", fam.len());
    if tsv {
        out.push_str("level\tblock\tnetwork\tagent\n");
    }
    for level in 0..=top {
        let part = bisim_partition(&fam, level);
        if !tsv {
            let _ = writeln!(out, "level {level} blocks={}", part.blocks.len());
        }
        for (b, block) in part.blocks.iter().enumerate() {
            if tsv {
                for p in block {
                    let _ = writeln!(out, "{level}\t{b}\t{}\t{}", fam.get(p.network).name(), p.agent);
                }
            } else {
                let members: Vec<String> =
                    block.iter().map(|p| format!("{}:{}", fam.get(p.network).name(), p.agent)).collect();
                let _ = writeln!(out, "  {b}: {}", members.join(" "));
            }
        }
    }
    Ok(Outcome { stdout: out, code: EXIT_OK })
}

/// Agents in file order must form a ring: every agent sends left, and on a
/// bidirectional ring also right.
fn check_ring(net: &Network, bidirectional: bool) -> Result<(), CliError> {
    let n = net.len();
    let shaped = n >= 2
        && (0..n).all(|k| {
            let (left, right) = ((k + n - 1) % n, (k + 1) % n);
            let degree = if bidirectional && n > 2 { 2 } else { 1 };
            net.out_degree(k) == degree && net.has_edge(k, left) && (!bidirectional || net.has_edge(k, right))
        });
    if shaped {
        Ok(())
    } else {
        let kind = if bidirectional { "bidirectional" } else { "unidirectional" };
        Err(CliError::Input(format!("{} is not a {kind} ring with agents listed in ring order", net.name())))
    }
}

fn traced<Q: Protocol>(topo: &Topology, q: &Q, sched: Scheduler, budget: usize) -> (String, bool) {
    fn render<P: crate::runtime::Program>(r: Result<Run<P>, RunError<P>>) -> (String, bool) {
        match r {
            Ok(run) => (run.trace(), true),
            Err(e) => (format!("{}# {e}\n", e.partial().trace()), false),
        }
    }
    render(run_protocol(topo, q, sched, budget))
}

fn simulate(
    net: &Network,
    protocol: ProtocolName,
    fname: Option<&str>,
    family: &OptionalFamily,
    sched: SchedArgs,
    rounds: Option<usize>,
    budget: usize,
) -> Result<(String, String, bool), CliError> {
    let scheduler = sched.scheduler();
    let mut header = format!("# gfc simulate net={} protocol={}", net.name(), protocol.label());
    let diameter = || net.diameter().map_err(CliError::input);
    let (trace, ok) = match protocol {
        ProtocolName::PgGc => {
            let f = function(fname.ok_or_else(|| CliError::Usage("pg_gc needs --fn".into()))?)?;
            let (fam, desc) = match family.family {
                Some(kind) => build_family(kind, &family.params, std::slice::from_ref(net))?,
                None => {
                    let fam = NetworkFamily::new("single", vec![net.clone()]).map_err(CliError::input)?;
                    (fam, "single".to_string())
                }
            };
            let _ = write!(header, " fn={} family=\"{desc}\" members={}", f.name(), fam.len());
            let q = pg_gc(&fam, &f).map_err(CliError::input)?;
            traced(&Topology::from_network(net), &q, scheduler, budget)
        }
        ProtocolName::FullInfo => {
            let r = match rounds {
                Some(r) => r,
                None => diameter()?,
            };
            let _ = write!(header, " rounds={r}");
            traced(&Topology::from_network(net), &full_information(r), scheduler, budget)
        }
        ProtocolName::Flooding => {
            ring_ids(net).map_err(CliError::input)?;
            let d = match rounds {
                Some(r) => r,
                None => diameter()?,
            };
            let _ = write!(header, " rounds={d}");
            traced(&Topology::from_network(net), &flooding(d), scheduler, budget)
        }
        p => {
            let bidirectional = p.ring().expect("remaining protocols run on rings");
            ring_ids(net).map_err(CliError::input)?;
            check_ring(net, bidirectional)?;
            let topo = Topology::ring(net, bidirectional);
            match p {
                ProtocolName::Lcr => traced(&topo, &lcr(), scheduler, budget),
                ProtocolName::LcrPrime => traced(&topo, &lcr_prime(), scheduler, budget),
                ProtocolName::P2 => traced(&topo, &p2(), scheduler, budget),
                _ => traced(&topo, &p2_prime(), scheduler, budget),
            }
        }
    };
    let _ = write!(header, " scheduler={} budget={budget}", sched.describe());
    Ok((header, trace, ok))
}

fn stats_on<Q: Protocol>(q: &Q, ids: &[u32], bidirectional: bool) -> Result<MessageStats, CliError> {
    let run = run_protocol(&ring_topology(ids, bidirectional), q, Scheduler::sync(), 100_000).map_err(CliError::input)?;
    Ok(message_stats(&run))
}

fn bench_row(p: ProtocolName, ids: &[u32]) -> Result<MessageStats, CliError> {
    let mut s = match p {
        ProtocolName::Lcr => stats_on(&lcr(), ids, false),
        ProtocolName::LcrPrime => stats_on(&lcr_prime(), ids, false),
        ProtocolName::P2 => stats_on(&p2(), ids, true),
        ProtocolName::P2Prime => stats_on(&p2_prime(), ids, true),
        ProtocolName::Flooding => {
            let net = Network::bi_ring(ring_name(ids, true), &ids.iter().map(u32::to_string).collect::<Vec<_>>(), "1")
                .map_err(CliError::input)?;
            let d = net.diameter().map_err(CliError::input)?;
            stats_on(&flooding(d), ids, true)
        }
        other => return Err(CliError::Usage(format!("bench runs election protocols, not {}", other.label()))),
    }?;
    s.protocol = p.label().to_string();
    Ok(s)
}

fn bench(
    protocols: &[ProtocolName],
    min_n: usize,
    max_n: usize,
    samples: usize,
    seed: u64,
    tsv: bool,
) -> Result<Outcome, CliError> {
    if min_n < 2 || min_n > max_n {
        return Err(CliError::Usage("need 2 <= min-n <= max-n".into()));
    }
    let rings: Vec<Vec<u32>> = (min_n..=max_n)
        .flat_map(|n| (0..samples).map(move |s| shuffled_ids(n, seed.wrapping_mul(1_000_003) ^ (n * 1009 + s) as u64)))
        .collect();
    let jobs: Vec<(usize, ProtocolName)> =
        (0..rings.len()).flat_map(|r| protocols.iter().map(move |&p| (r, p))).collect();
    let rows: Vec<MessageStats> =
        jobs.par_iter().map(|&(r, p)| bench_row(p, &rings[r])).collect::<Result<_, _>>()?;
    let names: Vec<String> = protocols.iter().map(|p| p.label().to_string()).collect();
    let mut out = format!(
        "# gfc bench protocols={} n={min_n}..{max_n} samples={samples} seed={seed}\n",
        names.join(",")
    );
    let sep = if tsv { "\t" } else { " " };
    let cols = ["protocol", "ring", "n", "messages", "steps", "bytes"];
    let table: Vec<[String; 6]> = rows
        .iter()
        .zip(&jobs)
        .map(|(s, &(r, _))| {
            [
                s.protocol.clone(),
                s.ring.clone(),
                rings[r].len().to_string(),
                s.messages.to_string(),
                s.steps.to_string(),
                s.bytes.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = cols.iter().map(|c| c.len()).collect();
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut line = |cells: &[&str]| {
        let mut l = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                l.push_str(sep);
            }
            if tsv || i + 1 == cells.len() {
                l.push_str(cell);
            } else {
                let _ = write!(l, "{cell:<w$}", w = widths[i]);
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&cols);
    for row in &table {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    // Savings of each optimized protocol against its original.
    let pairs = [(ProtocolName::Lcr, ProtocolName::LcrPrime), (ProtocolName::P2, ProtocolName::P2Prime)];
    let mut savings = Vec::new();
    for (base, opt) in pairs {
        let (Some(bi), Some(oi)) =
            (protocols.iter().position(|&p| p == base), protocols.iter().position(|&p| p == opt))
        else {
            continue;
        };
        for r in 0..rings.len() {
            let b = &rows[r * protocols.len() + bi];
            let o = &rows[r * protocols.len() + oi];
            savings.push((base.label(), opt.label(), o.ring.clone(), rings[r].len(), b.messages as i64 - o.messages as i64));
        }
    }
    if !savings.is_empty() {
        out.push('\n');
        if tsv {
            out.push_str("original\toptimized\tring\tn\tsaved\n");
        }
        for (b, o, ring, n, saved) in savings {
            if tsv {
                let _ = writeln!(out, "{b}\t{o}\t{ring}\t{n}\t{saved}");
            } else {
                let _ = writeln!(out, "saved {b}->{o} ring={ring} n={n} messages={saved}");
            }
        }
    }
    Ok(Outcome { stdout: out, code: EXIT_OK })
}

/// Runs the knowledge-based check of an election protocol on every
/// distinct-id ring of the given sizes.
pub fn verify(
    protocol: ProtocolName,
    sizes: std::ops::RangeInclusive<usize>,
    max_id: u32,
    horizon: usize,
    policy: Policy,
) -> Result<DeFactoReport, CliError> {
    let bidirectional = protocol
        .ring()
        .ok_or_else(|| CliError::Usage(format!("verify checks lcr, lcr_prime, p2 or p2_prime, not {}", protocol.label())))?;
    let rings = distinct_id_rings(max_id, sizes);
    if rings.is_empty() {
        return Err(CliError::Usage("no rings: need max-n >= 2 and max-id >= min-n".into()));
    }
    let (worlds, family) = ring_universe(&rings, horizon, bidirectional);
    fn check<Q: Protocol>(
        q: Q,
        worlds: Vec<crate::epistemic::World>,
        family: usize,
        policy: Policy,
    ) -> Result<DeFactoReport, CliError> {
        let mut sys = build_system(q, worlds, family, policy).map_err(CliError::input)?;
        Ok(sys.de_facto_check())
    }
    match protocol {
        ProtocolName::Lcr => check(lcr(), worlds, family, policy),
        ProtocolName::LcrPrime => check(lcr_prime(), worlds, family, policy),
        ProtocolName::P2 => check(p2(), worlds, family, policy),
        _ => check(p2_prime(), worlds, family, policy),
    }
}

fn verify_tsv(rep: &DeFactoReport) -> String {
    let mut out = format!("# protocol={} states={} mismatches={}\n", rep.protocol, rep.states, rep.mismatches.len());
    out.push_str("network\ttime\tagent\tproto_sends\tkb_sends\n");
    for m in &rep.mismatches {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            m.network,
            m.time,
            m.agent,
            m.proto_sends.join(","),
            m.kb_sends.join(",")
        );
    }
    out
}

fn gen(family: &FamilyArgs, dir: &Path) -> Result<Outcome, CliError> {
    let (fam, desc) = build_family(family.family, &family.params, &[])?;
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut out = format!("# gfc gen family=\"{desc}\" members={}\n", fam.len());
    for net in fam.members() {
        let file: String =
            net.name().chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
        let path = dir.join(format!("{file}.net"));
        fs::write(&path, net.to_text()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(Outcome { stdout: out, code: EXIT_OK })
}
