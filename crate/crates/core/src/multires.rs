//! Bounded-spread reduction over the HST: a lucky test on the rough answer,
//! and otherwise a search in a small navigable graph built for one cluster
//! of one resolution slice.
//!
//! Resolution `i` covers distances in `[2^i, 2^(i+1))`. A node `v` is
//! active at the `M + 1` resolutions ending at `res(label(v))` and at the
//! `M + 1` ending at `res(label(parent(v)))` (leaves: parent window only,
//! root: own window only). Slice `i` holds the representatives of nodes
//! active at `i`, clustered by `f_i(p) = anc(p, 2^(i+M))`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{config, Error, Result};
use crate::greedy::GreedyOrder;
use crate::hst::Hst;
use crate::metric::{resolution, PointSet};
use crate::nav_graph::{baseline_search, NavGraph};
use crate::spreadfree::{Answer, BaseIndex};
use crate::stats::{QueryStats, StopReason};

/// `M = 7 + ceil(log2(n^3 / eps))`.
pub fn window_len(n: usize, eps: f64) -> i32 {
    let x = (n as f64).powi(3) / eps;
    let r = resolution(x);
    let ceil = if pow2(r) == x { r } else { r + 1 };
    7 + ceil
}

/// Exact `2^e` (zero below the subnormal range, infinity above the finite range).
pub fn pow2(e: i32) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if (-1074..-1022).contains(&e) {
        f64::from_bits(1u64 << (e + 1074))
    } else if e < -1074 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Inclusive resolution windows of `v`: own window (internal nodes) and
/// parent window (non-root nodes).
pub fn active_windows(hst: &Hst, m: i32, v: u32) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(2);
    if !hst.is_leaf(v) {
        let top = resolution(hst.label(v));
        out.push((top - m, top));
    }
    if let Some(p) = hst.parent(v) {
        let top = resolution(hst.label(p));
        out.push((top - m, top));
    }
    out
}

/// Active resolutions of `v` as a sorted set.
pub fn active_resolutions(hst: &Hst, m: i32, v: u32) -> Vec<i32> {
    let mut r: Vec<i32> = active_windows(hst, m, v).into_iter().flat_map(|(a, b)| a..=b).collect();
    r.sort_unstable();
    r.dedup();
    r
}

/// Result of the lucky test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lucky {
    /// The rough answer is certified as a `(1 + eps)`-ANN.
    Success { id: usize, dist: f64 },
    /// Carried state: rough answer `p` at distance `l`, and `u = anc(p, l)`.
    Failure { p: usize, l: f64, u: u32 },
}

/// Certifies the rough answer when `label(u) <= eps l / 2` and
/// `label(parent(u)) > 6 n^2 l` for `u = anc(p, l)`.
pub fn lucky_query(base: &BaseIndex, q: &[f64], eps: f64, stats: &mut QueryStats) -> Result<Lucky> {
    let hit = base.rough.query(&base.points, q)?;
    stats.rough_time_steps += hit.steps;
    stats.dist_evals += 1;
    let (u, steps) = base.ancestors.query(&base.hst, hit.id, hit.dist);
    stats.ancestor_steps += steps;
    let n = base.points.len() as f64;
    let l = hit.dist;
    if base.hst.label(u) <= eps * l / 2.0 && base.hst.parent_label(u) > 6.0 * n * n * l {
        Ok(Lucky::Success { id: hit.id, dist: l })
    } else {
        Ok(Lucky::Failure { p: hit.id, l, u })
    }
}

/// A navigable graph over one cluster, in local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterGraph {
    /// Local index -> original id, ascending.
    pub ids: Vec<u32>,
    pub(crate) points: PointSet,
    pub greedy: GreedyOrder,
    pub graph: NavGraph,
}

impl ClusterGraph {
    pub(crate) fn build(all: &PointSet, ids: Vec<u32>, eps: f64, c_const: f64) -> Result<ClusterGraph> {
        let points = all.subset(&ids);
        let greedy = GreedyOrder::build(&points, 0, eps, c_const)?;
        let graph = NavGraph::build(&greedy);
        Ok(ClusterGraph { ids, points, greedy, graph })
    }

    pub(crate) fn from_parts(all: &PointSet, ids: Vec<u32>, greedy: GreedyOrder, graph: NavGraph) -> ClusterGraph {
        let points = all.subset(&ids);
        ClusterGraph { ids, points, greedy, graph }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub resolution: i32,
    /// The HST node `f_i(p)` shared by all members.
    pub head: u32,
    /// Index into the deduplicated graph list.
    pub graph: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiResIndex {
    pub base: Arc<BaseIndex>,
    pub eps: f64,
    pub c_const: f64,
    pub m: i32,
    /// Per active resolution: `(point, cluster)` sorted by point.
    pub slices: BTreeMap<i32, Vec<(u32, u32)>>,
    pub clusters: Vec<Cluster>,
    pub graphs: Vec<ClusterGraph>,
}

/// `T_v[j] = anc(v, 2^(res(label v) + j))` for `j = 1..=2M`, internal nodes only.
struct AncestorTable {
    width: usize,
    rows: Vec<u32>,
    n: usize,
}

impl AncestorTable {
    fn build(hst: &Hst, m: i32) -> AncestorTable {
        let n = hst.leaf_count();
        let width = 2 * m as usize;
        let internal = hst.node_count() - n;
        let mut rows = vec![0u32; internal * width];
        // Parents have larger ids, so descending ids is a top-down order.
        for v in (n..hst.node_count()).rev() {
            let v = v as u32;
            let base_res = resolution(hst.label(v));
            let row = (v as usize - n) * width;
            match hst.parent(v) {
                None => rows[row..row + width].fill(v),
                Some(u) => {
                    let (lu, ru) = (hst.label(u), resolution(hst.label(u)));
                    let urow = (u as usize - n) * width;
                    for j in 1..=width {
                        let r = pow2(base_res + j as i32);
                        rows[row + j - 1] = if r < lu {
                            v
                        } else {
                            match base_res + j as i32 - ru {
                                0 => u,
                                jp => rows[urow + jp as usize - 1],
                            }
                        };
                    }
                }
            }
        }
        AncestorTable { width, rows, n }
    }

    fn get(&self, v: u32, j: usize) -> u32 {
        self.rows[(v as usize - self.n) * self.width + j - 1]
    }
}

/// `f_i(p)` given the lowest node `v` with `rep(v) = p` active at `i`.
fn cluster_head(base: &BaseIndex, table: &AncestorTable, m: i32, i: i32, v: u32) -> u32 {
    let hst = &base.hst;
    let r = pow2(i + m);
    if !hst.is_leaf(v) {
        let j = i + m - resolution(hst.label(v));
        if j == 0 {
            if hst.label(v) <= r {
                return v;
            }
            // The answer lies strictly below v on the path to its representative.
            return base.ancestors.query(hst, hst.rep(v) as usize, r).0;
        }
        if (1..=table.width as i32).contains(&j) {
            return table.get(v, j as usize);
        }
    }
    let Some(u) = hst.parent(v) else { return v };
    if r < hst.label(u) {
        return v;
    }
    match i + m - resolution(hst.label(u)) {
        0 => u,
        ju => table.get(u, ju as usize),
    }
}

impl MultiResIndex {
    /// Builds slices, clusters, and one graph per distinct cluster, at accuracy `eps / 2`.
    pub fn build(base: Arc<BaseIndex>, eps: f64, c_const: f64) -> Result<MultiResIndex> {
        let n = base.points.len();
        crate::greedy::check_eps(eps)?;
        crate::greedy::check_c(c_const)?;
        if eps * (n as f64) < 1.0 {
            return config(format!("multi-resolution index needs eps >= 1/n, got eps = {eps} with n = {n}"));
        }
        let m = window_len(n, eps);
        let hst = &base.hst;
        let table = AncestorTable::build(hst, m);

        // Lowest node per (resolution, representative); chains of equal rep are ordered by id.
        let mut triples: Vec<(i32, u32, u32)> = Vec::new();
        if n > 1 {
            for v in 0..hst.node_count() as u32 {
                for i in active_resolutions(hst, m, v) {
                    triples.push((i, hst.rep(v), v));
                }
            }
        }
        triples.sort_unstable();
        triples.dedup_by_key(|t| (t.0, t.1));

        let mut groups: BTreeMap<(i32, u32), Vec<u32>> = BTreeMap::new();
        for &(i, p, v) in &triples {
            groups.entry((i, cluster_head(&base, &table, m, i, v))).or_default().push(p);
        }

        let mut by_members: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut graphs = Vec::new();
        let mut clusters = Vec::with_capacity(groups.len());
        let mut slices: BTreeMap<i32, Vec<(u32, u32)>> = BTreeMap::new();
        for ((i, head), members) in groups {
            let cid = clusters.len() as u32;
            let slice = slices.entry(i).or_default();
            slice.extend(members.iter().map(|&p| (p, cid)));
            let graph = match by_members.get(&members) {
                Some(&g) => g,
                None => {
                    let g = graphs.len() as u32;
                    graphs.push(ClusterGraph::build(&base.points, members.clone(), eps / 2.0, c_const)?);
                    by_members.insert(members, g);
                    g
                }
            };
            clusters.push(Cluster { resolution: i, head, graph });
        }
        for s in slices.values_mut() {
            s.sort_unstable();
        }
        Ok(MultiResIndex { base, eps, c_const, m, slices, clusters, graphs })
    }

    /// Cluster of slice `i` containing point `p`.
    pub fn cluster_of(&self, i: i32, p: u32) -> Option<u32> {
        let slice = self.slices.get(&i)?;
        let at = slice.partition_point(|&(x, _)| x < p);
        slice.get(at).filter(|&&(x, _)| x == p).map(|&(_, c)| c)
    }

    /// Members of cluster `c`.
    pub fn members(&self, c: u32) -> &[u32] {
        &self.graphs[self.clusters[c as usize].graph as usize].ids
    }

    /// `f_i(p)` for every `(i, p)` in every slice.
    pub fn heads(&self) -> Vec<(i32, u32, u32)> {
        let mut out = Vec::new();
        for (&i, slice) in &self.slices {
            for &(p, c) in slice {
                out.push((i, p, self.clusters[c as usize].head));
            }
        }
        out
    }

    pub fn total_slice_size(&self) -> usize {
        self.slices.values().map(Vec::len).sum()
    }

    /// Edges over the distinct stored graphs.
    pub fn total_graph_edges(&self) -> usize {
        self.graphs.iter().map(|g| g.graph.edge_count()).sum()
    }

    pub fn query(&self, q: &[f64]) -> Result<Answer> {
        let mut stats = QueryStats::default();
        let (p, l, u) = match lucky_query(&self.base, q, self.eps, &mut stats)? {
            Lucky::Success { id, dist } => {
                stats.stop_reason = if dist == 0.0 { StopReason::ExactHit } else { StopReason::Lucky };
                return Ok(Answer { id, dist, stats });
            }
            Lucky::Failure { p, l, u } => (p, l, u),
        };
        let n = self.base.points.len() as f64;
        let s = self.base.hst.rep(u);
        let psi = resolution(self.eps * l / (8.0 * n));
        let Some(c) = self.cluster_of(psi, s) else {
            return Err(Error::Internal(format!(
                "representative {s} of node {u} is missing from slice {psi} (rough answer {p}, distance {l})"
            )));
        };
        let cg = &self.graphs[self.clusters[c as usize].graph as usize];
        let (local, walk) = baseline_search(&cg.graph, &cg.points, &cg.greedy, q, self.eps / 2.0, None);
        stats.hops += walk.hops;
        stats.edges_scanned += walk.edges_scanned;
        stats.dist_evals += walk.dist_evals;
        stats.stop_reason = walk.stop_reason;
        let id = cg.ids[local] as usize;
        Ok(Answer { id, dist: self.base.points.dist_to(id, q), stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, gen_queries, DatasetKind};
    use crate::metric::{brute_force_nn, spread_stats};
    use crate::spreadfree::{IndexConfig, SpreadFreeIndex};

    fn base(kind: DatasetKind, n: usize, dim: usize) -> Arc<BaseIndex> {
        let p = gen_dataset(kind, n, dim, 2).unwrap();
        SpreadFreeIndex::build(p, IndexConfig::new(0.25)).unwrap().base
    }

    #[test]
    fn window_formula() {
        assert_eq!(window_len(16, 0.5), 20);
        assert_eq!(resolution(5.0), 2);
        assert_eq!(pow2(-3), 0.125);
        assert_eq!(pow2(900), 2f64.powi(900));
        assert_eq!(pow2(-1074), f64::from_bits(1));
    }

    #[test]
    fn windows_are_bounded() {
        let b = base(DatasetKind::Uniform, 60, 2);
        let m = window_len(60, 0.25);
        for v in 0..b.hst.node_count() as u32 {
            let r = active_resolutions(&b.hst, m, v);
            assert!(r.len() <= 2 * (m as usize + 1));
            assert!(!r.is_empty());
        }
        let root = b.hst.root();
        let top = resolution(b.hst.label(root));
        assert_eq!(active_resolutions(&b.hst, m, root), (top - m..=top).collect::<Vec<_>>());
    }

    #[test]
    fn singleton_is_always_lucky() {
        let p = PointSet::new(1, vec![2.0]).unwrap();
        let b = SpreadFreeIndex::build(p, IndexConfig::new(0.25)).unwrap().base;
        let mut st = QueryStats::default();
        assert!(matches!(lucky_query(&b, &[9.0], 0.25, &mut st).unwrap(), Lucky::Success { id: 0, .. }));
    }

    #[test]
    fn rejects_eps_below_one_over_n() {
        let b = base(DatasetKind::Uniform, 16, 2);
        assert!(matches!(MultiResIndex::build(b, 0.05, 26.0), Err(Error::Config(_))));
    }

    #[test]
    fn heads_match_ancestor_walk() {
        for (kind, n, dim) in [(DatasetKind::Uniform, 120, 2), (DatasetKind::Geochain, 90, 1), (DatasetKind::Clusters, 100, 3)] {
            let b = base(kind, n, dim);
            let idx = MultiResIndex::build(Arc::clone(&b), 0.25, 26.0).unwrap();
            for (i, p, head) in idx.heads() {
                assert_eq!(head, b.hst.ancestor_naive(p as usize, pow2(i + idx.m)), "i={i} p={p}");
            }
            for (&i, slice) in &idx.slices {
                for w in slice.windows(2) {
                    assert!(w[0].0 < w[1].0);
                }
                for &(_, c) in slice {
                    assert_eq!(idx.clusters[c as usize].resolution, i);
                }
            }
        }
    }

    #[test]
    fn cluster_bounds_and_answers() {
        for (kind, n, dim, eps) in [(DatasetKind::Clusters, 150, 2, 0.25), (DatasetKind::Geochain, 120, 1, 0.1)] {
            let b = base(kind, n, dim);
            let idx = MultiResIndex::build(Arc::clone(&b), eps, 26.0).unwrap();
            for c in 0..idx.clusters.len() as u32 {
                let members = idx.members(c);
                if members.len() < 2 {
                    continue;
                }
                let i = idx.clusters[c as usize].resolution;
                let st = spread_stats(&b.points.subset(members)).unwrap();
                assert!(st.diameter <= pow2(i + idx.m));
                assert!(st.closest_pair >= pow2(i - 2 * idx.m));
            }
            let mut lucky = 0;
            let mut queries = gen_queries(&b.points, 150, 9);
            // Just outside a tight cluster: far beyond its diameter, far below the gaps.
            queries.extend((0..20).map(|id| b.points.point(id).iter().map(|x| x + 0.1).collect::<Vec<_>>()));
            for q in queries {
                let (_, best) = brute_force_nn(&b.points, &q).unwrap();
                let a = idx.query(&q).unwrap();
                assert!(a.dist <= (1.0 + eps) * best, "{kind}: {} vs {best}", a.dist);
                lucky += (a.stats.stop_reason == StopReason::Lucky) as usize;
            }
            if kind == DatasetKind::Clusters {
                assert!(lucky > 0);
            }
        }
    }
}
