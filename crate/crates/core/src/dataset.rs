//! Deterministic synthetic datasets and query workloads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::metric::PointSet;

/// Largest geometric chain whose coordinates stay well inside the f64 range.
pub const GEOCHAIN_MAX_N: usize = 900;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    /// Uniform in the unit cube.
    Uniform,
    /// About sqrt(n) tight clusters spread far apart.
    Clusters,
    /// Points `2^i - 1` on the first axis: gaps 1, 2, 4, ... and spread about `2^(n-1)`.
    Geochain,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Uniform => "uniform",
            DatasetKind::Clusters => "clusters",
            DatasetKind::Geochain => "geochain",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DatasetKind::Uniform),
            "clusters" => Ok(DatasetKind::Clusters),
            "geochain" => Ok(DatasetKind::Geochain),
            other => input(format!("unknown dataset kind '{other}'")),
        }
    }
}

/// Generates `n` points of the given kind. Same arguments, same points.
pub fn gen_dataset(kind: DatasetKind, n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    if n < 2 {
        return input("datasets need at least two points");
    }
    if dim == 0 {
        return input("dimension must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = match kind {
        DatasetKind::Uniform => (0..n * dim).map(|_| rng.gen::<f64>()).collect(),
        DatasetKind::Clusters => clusters(&mut rng, n, dim),
        DatasetKind::Geochain => {
            if n > GEOCHAIN_MAX_N {
                return input(format!("geochain supports at most {GEOCHAIN_MAX_N} points"));
            }
            let mut coords = vec![0.0; n * dim];
            let mut x = 0.0;
            for i in 0..n {
                coords[i * dim] = x;
                x += 2f64.powi(i as i32);
            }
            coords
        }
    };
    PointSet::new(dim, coords)
}

fn clusters(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    let k = ((n as f64).sqrt().ceil() as usize).max(1);
    let centers: Vec<f64> = (0..k * dim).map(|_| rng.gen::<f64>() * 1e6).collect();
    let mut coords = Vec::with_capacity(n * dim);
    for i in 0..n {
        let c = &centers[(i % k) * dim..(i % k + 1) * dim];
        coords.extend(c.iter().map(|&x| x + (rng.gen::<f64>() - 0.5) * 1e-3));
    }
    coords
}

/// Query workload for a point set.
///
/// Every tenth query is an exact data point; the rest are split 3:1 between
/// perturbations of a random data point (by less than its nearest-neighbor
/// distance) and uniform samples from the slightly enlarged bounding box.
pub fn gen_queries(points: &PointSet, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dim = points.dim();
    let n = points.len();
    let (lo, hi) = bounding_box(points);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let base = rng.gen_range(0..n);
        let q = if k % 10 == 0 {
            points.point(base).to_vec()
        } else if k % 4 != 3 {
            let nn = nearest_other(points, base);
            let scale = rng.gen::<f64>() * nn / (dim as f64).sqrt();
            points.point(base).iter().map(|&x| x + (rng.gen::<f64>() * 2.0 - 1.0) * scale).collect()
        } else {
            (0..dim)
                .map(|d| {
                    let pad = (hi[d] - lo[d]) * 0.05;
                    lo[d] - pad + rng.gen::<f64>() * (hi[d] - lo[d] + 2.0 * pad)
                })
                .collect()
        };
        out.push(q);
    }
    out
}

fn nearest_other(points: &PointSet, id: usize) -> f64 {
    (0..points.len())
        .filter(|&j| j != id)
        .map(|j| points.dist(id, j))
        .fold(f64::INFINITY, f64::min)
        .min(f64::MAX)
}

pub(crate) fn bounding_box(points: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let dim = points.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points.iter() {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}
