//! Rough nearest-neighbor search with a randomly shifted compressed quadtree.
//!
//! Points are mapped into `[1/2, 5/8]^d`, shifted by `b ~ U[0, 1/2]^d`, and
//! live inside the root cell `[0, 2)^d`. Cell arithmetic is exact: every
//! coordinate becomes an integer key in units of `2^-F`, so the cell of
//! level `L` containing a key is `key >> (F + 1 - L)`. Exactness matters
//! because coordinates may span hundreds of binary orders of magnitude.
//!
//! A query returns the representative (lowest id) of the smallest
//! quadtree cell that contains the query and at least one point. That cell
//! is found by binary search over the points in Morton order: the point
//! sharing the longest Morton prefix with the query is adjacent to it.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{brute_force_nn, decompose, PointSet};

pub const LEAF_LEVEL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QtNode {
    /// Cell level; leaves carry [`LEAF_LEVEL`].
    pub level: u32,
    /// Inclusive range of Morton positions below this node.
    pub lo: u32,
    pub hi: u32,
    /// Lowest point id below this node.
    pub rep: u32,
    pub parent: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadtree {
    pub(crate) seed: u64,
    /// Per-dimension minimum coordinate.
    pub(crate) origin: Vec<f64>,
    /// Per-dimension offset `1/2 + b_d`.
    pub(crate) shift: Vec<f64>,
    /// Data is scaled by `2^-k`.
    pub(crate) k: i64,
    /// Keys are in units of `2^-frac_bits`.
    pub(crate) frac_bits: u64,
    /// Point ids in Morton order.
    pub(crate) order: Vec<u32>,
    /// Leaves `0..n` are indexed by point id; internal nodes follow.
    pub(crate) nodes: Vec<QtNode>,
    /// `keys[id * dim + d]`; derived data, rebuilt on load.
    keys: Vec<BigUint>,
    /// Internal nodes keyed by Morton range, sorted.
    ranges: Vec<(u32, u32, u32)>,
    /// Approximation factor assumed downstream (`2n`).
    pub rho: f64,
}

fn bitlen(x: &BigUint) -> u64 {
    x.bits()
}

/// Exact `x * 2^e` as a big integer `(m, e)` pair lowered to exponent `base`.
fn lower(x: f64, base: i64) -> BigInt {
    let (m, e) = decompose(x);
    BigInt::from(m) << ((e as i64 - base) as usize)
}

fn exponent_of(x: f64) -> Option<i64> {
    if x == 0.0 {
        None
    } else {
        Some(decompose(x).1 as i64)
    }
}

impl Quadtree {
    pub fn build(points: &PointSet, seed: u64) -> Quadtree {
        let dim = points.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dim).map(|_| 0.5 + rng.gen::<f64>() * 0.5).collect();
        let mut origin = vec![f64::INFINITY; dim];
        for p in points.iter() {
            for (o, &x) in origin.iter_mut().zip(p) {
                *o = o.min(x);
            }
        }
        let base = points.coords().iter().filter_map(|&x| exponent_of(x)).min().unwrap_or(0);
        let mut widest = BigUint::default();
        for d in 0..dim {
            let lo = lower(origin[d], base);
            for p in points.iter() {
                let span = (lower(p[d], base) - &lo).to_biguint().unwrap();
                if span > widest {
                    widest = span;
                }
            }
        }
        // 2^k > 8 * extent, so scaled offsets stay below 1/8.
        let b = bitlen(&widest) as i64;
        let k = base + b + 3;
        let shift_bits = shift.iter().filter_map(|&c| exponent_of(c)).map(|e| -e).max().unwrap_or(0);
        let frac_bits = (b + 3).max(shift_bits).max(1) as u64;
        let mut qt = Quadtree {
            seed,
            origin,
            shift,
            k,
            frac_bits,
            order: Vec::new(),
            nodes: Vec::new(),
            keys: Vec::new(),
            ranges: Vec::new(),
            rho: 2.0 * points.len() as f64,
        };
        qt.keys = qt.point_keys(points);
        qt.order = (0..points.len() as u32).collect();
        let keys = &qt.keys;
        qt.order.sort_by(|&a, &b| {
            morton_cmp(&keys[a as usize * dim..][..dim], &keys[b as usize * dim..][..dim])
        });
        qt.nodes = qt.link(points.len());
        qt.ranges = index_ranges(&qt.nodes, points.len());
        qt
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        points: &PointSet,
        seed: u64,
        origin: Vec<f64>,
        shift: Vec<f64>,
        k: i64,
        frac_bits: u64,
        order: Vec<u32>,
        nodes: Vec<QtNode>,
    ) -> Quadtree {
        let mut qt = Quadtree {
            seed,
            origin,
            shift,
            k,
            frac_bits,
            order,
            nodes,
            keys: Vec::new(),
            ranges: Vec::new(),
            rho: 2.0 * points.len() as f64,
        };
        qt.keys = qt.point_keys(points);
        qt.ranges = index_ranges(&qt.nodes, points.len());
        qt
    }

    fn dim(&self) -> usize {
        self.origin.len()
    }

    fn point_keys(&self, points: &PointSet) -> Vec<BigUint> {
        let mut keys = Vec::with_capacity(points.coords().len());
        for p in points.iter() {
            keys.extend(p.iter().enumerate().map(|(d, &x)| self.key(d, x)));
        }
        keys
    }

    /// `floor((x - origin) * 2^(F - k) + shift * 2^F)`, clamped into the root cell.
    fn key(&self, d: usize, x: f64) -> BigUint {
        let f = self.frac_bits as i64;
        let base = [exponent_of(x), exponent_of(self.origin[d])]
            .into_iter()
            .flatten()
            .min()
            .unwrap_or(0);
        let diff = lower(x, base) - lower(self.origin[d], base);
        let t = base + f - self.k;
        let scaled = if t >= 0 { diff << (t as usize) } else { diff >> ((-t) as usize) };
        let (cm, ce) = decompose(self.shift[d]);
        let key = scaled + (BigInt::from(cm) << ((ce as i64 + f) as usize));
        let top = (BigInt::from(1u8) << (f as usize + 1)) - 1u8;
        let key = if key.sign() == Sign::Minus { BigInt::default() } else { key.min(top) };
        key.to_biguint().unwrap()
    }

    fn point_key(&self, id: u32) -> &[BigUint] {
        let dim = self.dim();
        &self.keys[id as usize * dim..][..dim]
    }

    /// Deepest level whose cell holds both keys.
    fn common_level(&self, a: &[BigUint], b: &[BigUint]) -> u32 {
        let top = a.iter().zip(b).map(|(x, y)| bitlen(&(x ^ y))).max().unwrap_or(0);
        (self.frac_bits + 1 - top) as u32
    }

    /// Builds the compressed tree over the Morton order.
    fn link(&self, n: usize) -> Vec<QtNode> {
        let mut nodes: Vec<QtNode> =
            (0..n as u32).map(|id| QtNode { level: LEAF_LEVEL, lo: 0, hi: 0, rep: id, parent: u32::MAX }).collect();
        for (pos, &id) in self.order.iter().enumerate() {
            nodes[id as usize].lo = pos as u32;
            nodes[id as usize].hi = pos as u32;
        }
        let mut children: Vec<Vec<u32>> = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        let adopt = |nodes: &mut Vec<QtNode>, children: &mut Vec<Vec<u32>>, parent: u32, child: u32| {
            nodes[child as usize].parent = parent;
            children[parent as usize - n].push(child);
        };
        let mut pending = self.order.first().copied().unwrap_or(0);
        for w in self.order.windows(2) {
            let level = self.common_level(self.point_key(w[0]), self.point_key(w[1]));
            while let Some(&top) = stack.last() {
                if nodes[top as usize].level <= level {
                    break;
                }
                adopt(&mut nodes, &mut children, top, pending);
                pending = top;
                stack.pop();
            }
            match stack.last() {
                Some(&top) if nodes[top as usize].level == level => {
                    adopt(&mut nodes, &mut children, top, pending)
                }
                _ => {
                    let v = nodes.len() as u32;
                    nodes.push(QtNode { level, lo: 0, hi: 0, rep: 0, parent: u32::MAX });
                    children.push(Vec::new());
                    adopt(&mut nodes, &mut children, v, pending);
                    stack.push(v);
                }
            }
            pending = w[1];
        }
        while let Some(top) = stack.pop() {
            adopt(&mut nodes, &mut children, top, pending);
            pending = top;
        }
        // Post-order fill of ranges and representatives.
        let mut walk = vec![(pending, false)];
        while let Some((v, done)) = walk.pop() {
            if (v as usize) < n {
                continue;
            }
            let cs = &children[v as usize - n];
            if done {
                let (mut lo, mut hi, mut rep) = (u32::MAX, 0, u32::MAX);
                for &c in cs {
                    let c = nodes[c as usize];
                    lo = lo.min(c.lo);
                    hi = hi.max(c.hi);
                    rep = rep.min(c.rep);
                }
                let node = &mut nodes[v as usize];
                (node.lo, node.hi, node.rep) = (lo, hi, rep);
            } else {
                walk.push((v, true));
                walk.extend(cs.iter().map(|&c| (c, false)));
            }
        }
        nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[QtNode] {
        &self.nodes
    }

    /// Representative of the smallest nonempty cell containing `q`, with the
    /// number of binary-search steps taken.
    pub fn locate(&self, q: &[f64]) -> (u32, u64) {
        let n = self.order.len();
        let kq: Vec<BigUint> = q.iter().enumerate().map(|(d, &x)| self.key(d, x)).collect();
        let mut steps = 0u64;
        let key_at = |pos: usize| self.point_key(self.order[pos]);
        let pos = partition(0, n, &mut steps, |p| morton_cmp(key_at(p), &kq) == Ordering::Less);
        let level_at = |p: usize| self.common_level(key_at(p), &kq);
        let left = if pos > 0 { level_at(pos - 1) } else { 0 };
        let right = if pos < n { level_at(pos) } else { 0 };
        let best = left.max(right);
        // Common level with q rises towards pos from both sides.
        let lo = partition(0, pos, &mut steps, |p| level_at(p) < best);
        let hi = partition(pos, n, &mut steps, |p| level_at(p) >= best);
        let (lo, hi) = (lo as u32, hi as u32 - 1);
        let rep = if lo == hi {
            self.order[lo as usize]
        } else {
            let at = self.ranges.partition_point(|&(a, b, _)| (a, b) < (lo, hi));
            debug_assert_eq!(self.ranges[at].0, lo);
            debug_assert_eq!(self.ranges[at].1, hi);
            self.nodes[self.ranges[at].2 as usize].rep
        };
        (rep, steps)
    }
}

/// First index in `[lo, hi)` where `pred` turns false; `pred` must be monotone.
fn partition(mut lo: usize, mut hi: usize, steps: &mut u64, mut pred: impl FnMut(usize) -> bool) -> usize {
    while lo < hi {
        *steps += 1;
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn index_ranges(nodes: &[QtNode], n: usize) -> Vec<(u32, u32, u32)> {
    let mut r: Vec<(u32, u32, u32)> =
        nodes[n..].iter().enumerate().map(|(i, v)| (v.lo, v.hi, (n + i) as u32)).collect();
    r.sort_unstable();
    r
}

/// Z-order comparison: the dimension with the highest differing bit decides;
/// on equal bit positions the lower dimension is more significant.
fn morton_cmp(a: &[BigUint], b: &[BigUint]) -> Ordering {
    let mut lead = None;
    let mut lead_bits = 0;
    for (d, (x, y)) in a.iter().zip(b).enumerate() {
        let bits = bitlen(&(x ^ y));
        if bits > lead_bits {
            lead_bits = bits;
            lead = Some(d);
        }
    }
    match lead {
        None => Ordering::Equal,
        Some(d) => a[d].cmp(&b[d]),
    }
}

/// Which rough-ANN structure answers Stage I.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RoughKind {
    #[default]
    Quadtree,
    /// Exact nearest neighbor by linear scan; a test configuration.
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RoughAnn {
    Quadtree(Quadtree),
    Exact,
}

/// Answer of a rough query: a point, its true distance, and location steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoughHit {
    pub id: usize,
    pub dist: f64,
    pub steps: u64,
}

impl RoughAnn {
    pub fn build(points: &PointSet, kind: RoughKind, seed: u64) -> RoughAnn {
        match kind {
            RoughKind::Quadtree => RoughAnn::Quadtree(Quadtree::build(points, seed)),
            RoughKind::Exact => RoughAnn::Exact,
        }
    }

    pub fn kind(&self) -> RoughKind {
        match self {
            RoughAnn::Quadtree(_) => RoughKind::Quadtree,
            RoughAnn::Exact => RoughKind::Exact,
        }
    }

    /// Returns a point with `d(q, p) >= d(q, P)`; within `rho * d(q, P)` with good probability.
    pub fn query(&self, points: &PointSet, q: &[f64]) -> Result<RoughHit> {
        points.check_query(q)?;
        match self {
            RoughAnn::Quadtree(qt) => {
                let (id, steps) = qt.locate(q);
                let id = id as usize;
                Ok(RoughHit { id, dist: points.dist_to(id, q), steps })
            }
            RoughAnn::Exact => {
                let (id, dist) = brute_force_nn(points, q)?;
                Ok(RoughHit { id, dist, steps: points.len() as u64 })
            }
        }
    }
}

impl From<RoughKind> for u8 {
    fn from(k: RoughKind) -> u8 {
        match k {
            RoughKind::Quadtree => 0,
            RoughKind::Exact => 1,
        }
    }
}

impl TryFrom<u8> for RoughKind {
    type Error = Error;
    fn try_from(v: u8) -> Result<RoughKind> {
        match v {
            0 => Ok(RoughKind::Quadtree),
            1 => Ok(RoughKind::Exact),
            _ => Err(Error::Format(format!("unknown rough backend tag {v}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, gen_queries, DatasetKind};

    #[test]
    fn bigint_shift_floors() {
        assert_eq!(BigInt::from(-3) >> 1usize, BigInt::from(-2));
        assert_eq!(BigInt::from(3) >> 1usize, BigInt::from(1));
    }

    #[test]
    fn singleton_always_answers_its_point() {
        let p = PointSet::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        let qt = Quadtree::build(&p, 5);
        assert_eq!(qt.node_count(), 1);
        assert_eq!(qt.locate(&[1e9, -4.0, 0.0]).0, 0);
        assert_eq!(qt.locate(&[1.0, 2.0, 3.0]).0, 0);
    }

    #[test]
    fn compressed_shape_and_determinism() {
        for (seed, n, dim) in [(1u64, 100usize, 2usize), (2, 64, 8), (3, 37, 1)] {
            let p = gen_dataset(DatasetKind::Uniform, n, dim, seed).unwrap();
            let qt = Quadtree::build(&p, seed);
            assert_eq!(qt, Quadtree::build(&p, seed));
            assert!(qt.node_count() - n < n);
            let mut child_count = vec![0usize; qt.node_count()];
            let mut roots = 0;
            for v in qt.nodes() {
                match v.parent {
                    u32::MAX => roots += 1,
                    par => {
                        child_count[par as usize] += 1;
                        let pl = qt.nodes[par as usize].level;
                        assert!(pl < v.level);
                    }
                }
            }
            assert_eq!(roots, 1);
            assert!(child_count[..n].iter().all(|&c| c == 0));
            assert!(child_count[n..].iter().all(|&c| c >= 2));
            for v in &qt.nodes()[n..] {
                let ids = &qt.order[v.lo as usize..=v.hi as usize];
                assert_eq!(v.rep, *ids.iter().min().unwrap());
            }
        }
    }

    #[test]
    fn data_points_locate_themselves() {
        for kind in [DatasetKind::Uniform, DatasetKind::Clusters, DatasetKind::Geochain] {
            let p = gen_dataset(kind, 200, 2, 7).unwrap();
            let qt = Quadtree::build(&p, 11);
            for id in 0..p.len() {
                assert_eq!(qt.locate(p.point(id)).0 as usize, id);
            }
        }
    }

    /// Brute-force reference: smallest cell holding q and some point.
    fn reference(qt: &Quadtree, q: &[f64]) -> u32 {
        let kq: Vec<BigUint> = q.iter().enumerate().map(|(d, &x)| qt.key(d, x)).collect();
        let n = qt.order.len() as u32;
        let levels: Vec<u32> = (0..n).map(|id| qt.common_level(qt.point_key(id), &kq)).collect();
        let best = *levels.iter().max().unwrap();
        (0..n).filter(|&id| levels[id as usize] == best).min().unwrap()
    }

    #[test]
    fn locate_matches_exhaustive_cell_scan() {
        for (kind, dim) in [(DatasetKind::Uniform, 3usize), (DatasetKind::Clusters, 2), (DatasetKind::Geochain, 1)] {
            let p = gen_dataset(kind, 150, dim, 3).unwrap();
            let qt = Quadtree::build(&p, 8);
            for q in gen_queries(&p, 300, 4) {
                assert_eq!(qt.locate(&q).0, reference(&qt, &q));
            }
            let far: Vec<f64> = vec![-1e200; dim];
            assert_eq!(qt.locate(&far).0, reference(&qt, &far));
        }
    }

    #[test]
    fn rough_distance_never_undercuts() {
        let p = gen_dataset(DatasetKind::Uniform, 300, 4, 2).unwrap();
        let r = RoughAnn::build(&p, RoughKind::Quadtree, 1);
        for q in gen_queries(&p, 200, 5) {
            let hit = r.query(&p, &q).unwrap();
            let (_, best) = brute_force_nn(&p, &q).unwrap();
            assert!(hit.dist >= best);
        }
        let exact = RoughAnn::build(&p, RoughKind::Exact, 0);
        let q = [0.3, 0.3, 0.3, 0.3];
        assert_eq!(exact.query(&p, &q).unwrap().id, brute_force_nn(&p, &q).unwrap().0);
        assert!(r.query(&p, &[0.0]).is_err());
    }
}
