//! Command-line front end: dataset generation, index build, queries, benchmarks.

pub mod bench;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sfann::dataset::{gen_dataset, DatasetKind};
use sfann::metric::brute_force_nn;
use sfann::{bootstrap_query, Answer, Index, IndexConfig, QueryStats, RoughKind};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable overriding the worker-thread count.
pub const THREADS_VAR: &str = "SFAN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "sfann", version, about = "Spread-independent approximate nearest neighbor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Build an index and write it to disk.
    Build(BuildArgs),
    /// Answer queries against a saved index; CSV on stdout.
    Query(QueryArgs),
    /// Run the benchmark matrix; CSV on stdout, summary on stderr.
    Bench(BenchArgs),
}

#[derive(clap::Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_kind)]
    pub dist: DatasetKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `.fvecs` for binary output, anything else for text.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write this many queries (every tenth is a data point).
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long, requires = "queries")]
    pub queries_out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also build the multi-resolution index.
    #[arg(long)]
    pub multires: bool,
    #[arg(long, default_value_t = 0)]
    pub start_id: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Friends-ball constant (at least 26).
    #[arg(long, default_value_t = sfann::greedy::MIN_FRIENDS_CONST)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = RoughArg::Quadtree)]
    pub rough: RoughArg,
    /// Back-jump factor of bootstrapped queries.
    #[arg(long, default_value_t = sfann::spreadfree::DEFAULT_BOOTSTRAP_FACTOR)]
    pub bootstrap_factor: f64,
}

#[derive(clap::Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Spreadfree)]
    pub mode: Mode,
    /// Append the exact nearest distance and a (1+eps) check bit.
    #[arg(long)]
    pub verify: bool,
}

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    /// Smaller datasets and fewer queries.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Queries per configuration.
    #[arg(long)]
    pub queries: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RoughArg {
    Quadtree,
    Exact,
}

impl From<RoughArg> for RoughKind {
    fn from(r: RoughArg) -> RoughKind {
        match r {
            RoughArg::Quadtree => RoughKind::Quadtree,
            RoughArg::Exact => RoughKind::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum)]
pub enum Mode {
    Baseline,
    Spreadfree,
    Bootstrap,
    Multires,
    Oracle,
}

impl Mode {
    pub const SEARCHES: [Mode; 4] = [Mode::Baseline, Mode::Spreadfree, Mode::Bootstrap, Mode::Multires];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Spreadfree => "spreadfree",
            Mode::Bootstrap => "bootstrap",
            Mode::Multires => "multires",
            Mode::Oracle => "oracle",
        }
    }
}

fn parse_kind(s: &str) -> Result<DatasetKind, String> {
    DatasetKind::from_str(s).map_err(|e| e.to_string())
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Library errors already embed their source text; skip causes that repeat it.
        let mut last = String::new();
        for (i, cause) in self.error.chain().enumerate() {
            let text = cause.to_string();
            if last.contains(&text) {
                continue;
            }
            if i > 0 {
                f.write_str(": ")?;
            }
            f.write_str(&text)?;
            last = text;
        }
        Ok(())
    }
}

/// Exit code for an error chain: library errors map by kind; anything else is usage.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sfann::Error>() {
            return match e {
                sfann::Error::Config(_) => EXIT_CONFIG,
                sfann::Error::Io(_) | sfann::Error::Format(_) | sfann::Error::Input(_) => EXIT_IO,
                sfann::Error::Internal(_) => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests exit cleanly on stdout.
            if e.exit_code() == 0 {
                let _ = write!(out, "{}", e.render());
                return Ok(());
            }
            let _ = write!(log, "{}", e.render());
            return Err(CliError { code: EXIT_USAGE, error: anyhow!("invalid arguments") });
        }
    };
    execute(cli.command, out, log).map_err(|error| CliError { code: exit_code(&error), error })
}

pub fn execute(cmd: Command, out: &mut dyn Write, log: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a, log),
        Command::Build(a) => cmd_build(&a, log),
        Command::Query(a) => cmd_query(&a, out),
        Command::Bench(a) => cmd_bench(&a, out, log),
    }
}

pub fn cmd_gen(a: &GenArgs, log: &mut dyn Write) -> anyhow::Result<()> {
    if a.n < 2 {
        bail!("--n must be at least 2");
    }
    if a.dim < 1 {
        bail!("--dim must be at least 1");
    }
    let points = gen_dataset(a.dist, a.n, a.dim, a.seed).map_err(|e| anyhow!("{e}"))?;
    sfann::io::write_points(&a.out, &points).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(log, "wrote {} points of dimension {} to {}", points.len(), points.dim(), a.out.display())?;
    if let (Some(count), Some(path)) = (a.queries, &a.queries_out) {
        let qs = sfann::dataset::gen_queries(&points, count, a.seed.wrapping_add(1));
        let text: String = qs
            .iter()
            .map(|q| q.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ") + "\n")
            .collect();
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        writeln!(log, "wrote {count} queries to {}", path.display())?;
    }
    Ok(())
}

pub fn cmd_build(a: &BuildArgs, log: &mut dyn Write) -> anyhow::Result<()> {
    // The command line keeps eps strictly below 1/2.
    if !(a.eps > 0.0 && a.eps < 0.5) {
        return Err(sfann::Error::Config(format!("--eps must lie in (0, 1/2), got {}", a.eps)).into());
    }
    let points = sfann::io::read_points(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let cfg = IndexConfig {
        eps: a.eps,
        c_const: a.c,
        start_id: a.start_id,
        seed: a.seed,
        rough: a.rough.into(),
        bootstrap_factor: a.bootstrap_factor,
    };
    let t = Instant::now();
    let index = Index::build(points, cfg, true, a.multires)?;
    let elapsed = t.elapsed();
    index.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(log, "points: {}", index.main.len())?;
    writeln!(log, "edges: {}", index.main.graph.edge_count())?;
    if let Some(mr) = &index.multires {
        writeln!(log, "multires: {} slice entries, {} cluster-graph edges", mr.total_slice_size(), mr.total_graph_edges())?;
    }
    writeln!(log, "build_time_s: {:.3}", elapsed.as_secs_f64())?;
    Ok(())
}

/// Answers one query in `mode`.
pub fn answer(index: &Index, mode: Mode, q: &[f64]) -> anyhow::Result<Answer> {
    Ok(match mode {
        Mode::Baseline => index.main.baseline(q)?,
        Mode::Spreadfree => index.main.query(q)?,
        Mode::Bootstrap => {
            let coarse = index
                .coarse
                .as_ref()
                .ok_or_else(|| sfann::Error::Config("index has no coarse graph for bootstrap queries".into()))?;
            bootstrap_query(coarse, &index.main, q, None)?.answer
        }
        Mode::Multires => index
            .multires
            .as_ref()
            .ok_or_else(|| sfann::Error::Config("index was built without --multires".into()))?
            .query(q)?,
        Mode::Oracle => {
            let pts = index.main.points();
            let (id, dist) = brute_force_nn(pts, q)?;
            let stats = QueryStats { dist_evals: pts.len() as u64, ..QueryStats::default() };
            Answer { id, dist, stats }
        }
    })
}

/// Thread pool sized by `SFAN_THREADS` when set.
pub fn pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().map_err(|_| sfann::Error::Config(format!("{THREADS_VAR}={v} is not a count")))?;
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Query results as CSV, in query order regardless of scheduling.
pub fn query_csv(index: &Index, mode: Mode, queries: &[Vec<f64>], verify: bool) -> anyhow::Result<String> {
    let eps = index.main.eps();
    let rows: Vec<anyhow::Result<String>> = pool()?.install(|| {
        queries
            .par_iter()
            .enumerate()
            .map(|(qid, q)| {
                let a = answer(index, mode, q)?;
                let mut row = format!("{qid},{},{},{}", a.id, a.dist, a.stats.csv_fields());
                if verify {
                    let (_, best) = brute_force_nn(index.main.points(), q)?;
                    let ok = a.dist <= (1.0 + eps) * best;
                    write!(row, ",{best},{}", ok as u8).unwrap();
                }
                Ok(row)
            })
            .collect()
    });
    let mut out = format!("query_id,answer_id,distance,{}", QueryStats::CSV_HEADER);
    if verify {
        out.push_str(",oracle_distance,ok");
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_queries(path: &Path, dim: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let rows = sfann::io::read_rows(path).with_context(|| format!("reading {}", path.display()))?;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim || r.iter().any(|x| !x.is_finite()) {
            return Err(sfann::Error::Input(format!("query {i}: expected {dim} finite coordinates")).into());
        }
    }
    Ok(rows)
}

pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let index = Index::load(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
    let queries = read_queries(&a.queries, index.main.points().dim())?;
    if a.mode == Mode::Multires && index.multires.is_none() {
        return Err(sfann::Error::Config("index was built without --multires".into()).into());
    }
    out.write_all(query_csv(&index, a.mode, &queries, a.verify)?.as_bytes())?;
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, log: &mut dyn Write) -> anyhow::Result<()> {
    let plan = bench::Plan::standard(a.quick, a.seed, a.queries);
    let report = bench::run(&plan)?;
    out.write_all(report.to_csv().as_bytes())?;
    log.write_all(report.summary().as_bytes())?;
    Ok(())
}
