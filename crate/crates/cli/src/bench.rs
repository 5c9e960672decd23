//! Benchmark matrix: datasets x eps x modes, plus the geochain spread sweep.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sfann::dataset::{gen_dataset, gen_queries, DatasetKind};
use sfann::metric::{brute_force_nn, spread_stats};
use sfann::{Index, IndexConfig};

use crate::{answer, pool, Mode};

/// n values of the spread sweep.
pub const SWEEP_N: [usize; 4] = [64, 128, 256, 512];
pub const SWEEP_EPS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub kind: DatasetKind,
    pub n: usize,
    pub dim: usize,
    pub eps: f64,
    pub multires: bool,
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub instances: Vec<Instance>,
    pub queries: usize,
    pub seed: u64,
}

impl Plan {
    pub fn standard(quick: bool, seed: u64, queries: Option<usize>) -> Plan {
        let mut instances = Vec::new();
        let (sizes, dims, epss): (&[usize], &[usize], &[f64]) =
            if quick { (&[256], &[2], &[0.25]) } else { (&[500, 2000], &[2, 4], &[0.25, 0.1]) };
        for &kind in &[DatasetKind::Uniform, DatasetKind::Clusters] {
            for &n in sizes {
                for &dim in dims {
                    for &eps in epss {
                        let multires = eps * n as f64 >= 1.0;
                        instances.push(Instance { kind, n, dim, eps, multires });
                    }
                }
            }
        }
        for n in SWEEP_N {
            instances.push(Instance { kind: DatasetKind::Geochain, n, dim: 1, eps: SWEEP_EPS, multires: true });
        }
        Plan { instances, queries: queries.unwrap_or(if quick { 50 } else { 200 }), seed }
    }
}

/// Chain points the sweep queries sit near; every sweep size contains them.
pub const SWEEP_DEPTH: i32 = 16;

/// Query workload shared by every geochain size: points near `2^i - 1` for
/// `i < SWEEP_DEPTH`, every tenth one exact, so only `n` varies across the sweep.
pub fn sweep_queries(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let i = rng.gen_range(0..SWEEP_DEPTH);
            let x = 2f64.powi(i) - 1.0;
            let off = if k % 10 == 0 { 0.0 } else { (rng.gen::<f64>() - 0.5) * 2f64.powi(i - 1) };
            let mut q = vec![0.0; dim];
            q[0] = x + off;
            q
        })
        .collect()
}

/// Mean, median and 99th percentile of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

impl Summary {
    pub fn of(values: &[u64]) -> Summary {
        if values.is_empty() {
            return Summary::default();
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
        Summary { mean, median: median_sorted(&v), p99: v[(v.len() * 99).div_ceil(100) - 1] as f64 }
    }
}

/// Median of a sorted sample; the mean of the middle pair for even lengths.
pub fn median_sorted(v: &[u64]) -> f64 {
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dataset: DatasetKind,
    pub n: usize,
    pub dim: usize,
    pub eps: f64,
    pub mode: Mode,
    pub spread: f64,
    pub build_time_s: f64,
    pub edge_count: usize,
    pub hops: Summary,
    pub edges_scanned: Summary,
    pub dist_evals: Summary,
    pub recall: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Per-mode results over a query batch.
#[derive(Clone, Debug)]
pub struct ModeRun {
    pub hops: Vec<u64>,
    pub edges_scanned: Vec<u64>,
    pub dist_evals: Vec<u64>,
    pub valid: usize,
}

impl ModeRun {
    pub fn recall(&self) -> f64 {
        self.valid as f64 / self.hops.len().max(1) as f64
    }
}

/// Exact nearest distances for a query batch.
pub fn oracle(index: &Index, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    let pts = index.main.points();
    queries.par_iter().map(|q| Ok(brute_force_nn(pts, q)?.1)).collect()
}

/// Runs `mode` over all queries, checking each answer against `best`.
pub fn run_mode(index: &Index, mode: Mode, queries: &[Vec<f64>], best: &[f64]) -> Result<ModeRun> {
    let eps = index.main.eps();
    let answers: Vec<_> = queries.par_iter().map(|q| answer(index, mode, q)).collect::<Result<_>>()?;
    let mut run = ModeRun { hops: vec![], edges_scanned: vec![], dist_evals: vec![], valid: 0 };
    for (a, &b) in answers.iter().zip(best) {
        run.hops.push(a.stats.hops);
        run.edges_scanned.push(a.stats.edges_scanned);
        run.dist_evals.push(a.stats.dist_evals);
        if a.dist <= (1.0 + eps) * b {
            run.valid += 1;
        }
    }
    Ok(run)
}

/// Edges stored by the structures a mode searches.
pub fn edge_count(index: &Index, mode: Mode) -> usize {
    let main = index.main.graph.edge_count();
    match mode {
        Mode::Baseline | Mode::Spreadfree => main,
        Mode::Bootstrap => main + index.coarse.as_ref().map_or(0, |c| c.graph.edge_count()),
        Mode::Multires => index.multires.as_ref().map_or(0, |m| m.total_graph_edges()),
        Mode::Oracle => 0,
    }
}

pub fn run(plan: &Plan) -> Result<BenchReport> {
    let pool = pool()?;
    pool.install(|| {
        let mut report = BenchReport::default();
        for (k, inst) in plan.instances.iter().enumerate() {
            let seed = plan.seed.wrapping_add(k as u64);
            let points = gen_dataset(inst.kind, inst.n, inst.dim, seed)?;
            let spread = spread_stats(&points)?.spread;
            let queries = match inst.kind {
                DatasetKind::Geochain => sweep_queries(plan.queries, inst.dim, plan.seed),
                _ => gen_queries(&points, plan.queries, seed),
            };
            let t = Instant::now();
            let index = Index::build(points, IndexConfig::new(inst.eps), true, inst.multires)?;
            let build_time_s = t.elapsed().as_secs_f64();
            let best = oracle(&index, &queries)?;
            for mode in Mode::SEARCHES {
                if mode == Mode::Multires && index.multires.is_none() {
                    continue;
                }
                let r = run_mode(&index, mode, &queries, &best)?;
                report.rows.push(BenchRow {
                    dataset: inst.kind,
                    n: inst.n,
                    dim: inst.dim,
                    eps: inst.eps,
                    mode,
                    spread,
                    build_time_s,
                    edge_count: edge_count(&index, mode),
                    hops: Summary::of(&r.hops),
                    edges_scanned: Summary::of(&r.edges_scanned),
                    dist_evals: Summary::of(&r.dist_evals),
                    recall: r.recall(),
                });
            }
        }
        Ok(report)
    })
}

impl BenchReport {
    pub const CSV_HEADER: &'static str = "dataset,n,dim,eps,mode,spread,build_time_s,edge_count,\
hops_mean,hops_median,hops_p99,edges_scanned_mean,edges_scanned_median,edges_scanned_p99,\
dist_evals_mean,dist_evals_median,dist_evals_p99,recall";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{:e},{:.4},{}",
                r.dataset,
                r.n,
                r.dim,
                r.eps,
                r.mode.name(),
                r.spread,
                r.build_time_s,
                r.edge_count
            );
            for s in [r.hops, r.edges_scanned, r.dist_evals] {
                let _ = write!(out, ",{:.3},{},{}", s.mean, s.median, s.p99);
            }
            let _ = writeln!(out, ",{}", r.recall);
        }
        out
    }

    pub fn row(&self, kind: DatasetKind, n: usize, mode: Mode) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.dataset == kind && r.n == n && r.mode == mode)
    }

    /// Human-readable digest: recall check and the geochain edge-scan growth.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let worst = self.rows.iter().map(|r| r.recall).fold(1.0, f64::min);
        let _ = writeln!(s, "{} rows, minimum recall {}", self.rows.len(), worst);
        let _ = writeln!(s, "geochain sweep (eps = {SWEEP_EPS}), median edges scanned:");
        let _ = writeln!(s, "{:>6} {:>10} {:>10} {:>10}", "n", "baseline", "spreadfree", "log2 n");
        for n in SWEEP_N {
            let get = |m| self.row(DatasetKind::Geochain, n, m).map_or(f64::NAN, |r| r.edges_scanned.median);
            let _ = writeln!(
                s,
                "{:>6} {:>10} {:>10} {:>10}",
                n,
                get(Mode::Baseline),
                get(Mode::Spreadfree),
                (n as f64).log2()
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[4, 1, 3, 2]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.p99, 4.0);
        let v: Vec<u64> = (1..=200).collect();
        // 99% of 200 is 198 values, so p99 is the 198th smallest.
        assert_eq!(Summary::of(&v).p99, 198.0);
        assert_eq!(Summary::of(&[]), Summary::default());
    }

    #[test]
    fn sweep_queries_are_shared_and_near_the_chain() {
        let a = sweep_queries(100, 1, 3);
        assert_eq!(a, sweep_queries(100, 1, 3));
        let chain = gen_dataset(DatasetKind::Geochain, 64, 1, 0).unwrap();
        for (k, q) in a.iter().enumerate() {
            let (id, d) = brute_force_nn(&chain, q).unwrap();
            assert!(id < SWEEP_DEPTH as usize);
            if k % 10 == 0 {
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn quick_plan_includes_sweep() {
        let p = Plan::standard(true, 0, None);
        for n in SWEEP_N {
            assert!(p.instances.iter().any(|i| i.kind == DatasetKind::Geochain && i.n == n));
        }
    }
}
