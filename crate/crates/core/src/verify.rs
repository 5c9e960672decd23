//! Exhaustive structural checks, shared by unit tests, integration tests and
//! the acceptance suite. All checks are quadratic or worse; they are meant
//! for instances with at most a few thousand points.

use std::collections::BTreeMap;
use std::fmt;

use crate::greedy::GreedyOrder;
use crate::hst::{gap_check, AncestorIndex, Hst};
use crate::metric::{resolution, spread_stats, PointSet};
use crate::multires::{pow2, MultiResIndex};
use crate::nav_graph::NavGraph;
use crate::reverse_tree::{ReverseTree, PARENT_FACTOR};
use crate::spreadfree::{Answer, SpreadFreeIndex};
use crate::stats::{SearchTrace, StopReason};

/// Violation counter that keeps the first few messages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub checked: usize,
    pub count: usize,
    pub examples: Vec<String>,
}

impl Violations {
    const KEEP: usize = 5;

    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.count += 1;
            if self.examples.len() < Self::KEEP {
                self.examples.push(msg());
            }
        }
    }

    pub fn absorb(&mut self, other: Violations) {
        self.checked += other.checked;
        self.count += other.count;
        for m in other.examples {
            if self.examples.len() < Self::KEEP {
                self.examples.push(m);
            }
        }
    }

    pub fn is_clean(&self) -> bool {
        self.count == 0
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violations in {} checks", self.count, self.checked)?;
        for m in &self.examples {
            write!(f, "; {m}")?;
        }
        Ok(())
    }
}

/// Radius monotonicity, `r_i = d(p_i, P_{i-1})`, separation and covering of every prefix.
pub fn greedy(points: &PointSet, g: &GreedyOrder) -> Violations {
    let mut v = Violations::default();
    let n = g.len();
    let mut seen = vec![false; n];
    for &id in &g.order {
        v.check(!std::mem::replace(&mut seen[id as usize], true), || format!("id {id} repeated"));
    }
    for w in g.radii.windows(2) {
        v.check(w[0] >= w[1], || format!("radii increase: {} < {}", w[0], w[1]));
    }
    let far = (0..n).map(|p| points.dist(p, g.id(0))).fold(0.0, f64::max);
    v.check(g.radii[0] == far, || format!("r_0 = {} but farthest point is at {far}", g.radii[0]));
    // to_prefix[p] = d(p, P_i) for the current prefix.
    let mut to_prefix = vec![f64::INFINITY; n];
    let mut closest_pair = f64::INFINITY;
    for i in 0..n {
        let pi = g.id(i);
        if i > 0 {
            let direct = (0..i).map(|j| points.dist(pi, g.id(j))).fold(f64::INFINITY, f64::min);
            v.check(direct == g.radii[i], || format!("rank {i}: radius {} but prefix distance {direct}", g.radii[i]));
            closest_pair = closest_pair.min(direct);
            v.check(closest_pair >= g.radii[i], || format!("prefix {i} not r_i-separated"));
        }
        for (p, d) in to_prefix.iter_mut().enumerate() {
            *d = d.min(points.dist(p, pi));
        }
        if i + 1 < n {
            let cover = to_prefix.iter().cloned().fold(0.0, f64::max);
            v.check(cover == g.radii[i + 1], || format!("prefix {i} covers at {cover}, r_next = {}", g.radii[i + 1]));
        }
    }
    v
}

/// Friends lists equal the exact ball scan.
pub fn friends(points: &PointSet, g: &GreedyOrder) -> Violations {
    let mut v = Violations::default();
    for i in 0..g.len() {
        let reach = g.c_const * g.radii[i] / g.eps;
        let expect: Vec<u32> =
            (0..i).filter(|&j| points.dist(g.id(i), g.id(j)) <= reach).map(|j| j as u32).collect();
        v.check(expect.as_slice() == g.friends(i), || format!("rank {i}: friends differ"));
        if i > 0 {
            v.check(!g.friends(i).is_empty(), || format!("rank {i}: no friends"));
        }
    }
    v
}

/// Edge set equals reversed friends, lists sorted, labels equal destination radii.
pub fn graph(g: &GreedyOrder, graph: &NavGraph) -> Violations {
    let mut v = Violations::default();
    v.check(graph.vertex_count() == g.len(), || "vertex count".into());
    v.check(graph.edge_count() == g.total_friends(), || "edge count differs from friends total".into());
    let mut incoming = vec![Vec::new(); g.len()];
    for i in 0..g.len() {
        let (ts, ls) = (graph.out_edges(i), graph.out_labels(i));
        for w in ts.windows(2) {
            v.check(w[0] < w[1], || format!("vertex {i}: destinations not increasing"));
        }
        for w in ls.windows(2) {
            v.check(w[0] >= w[1], || format!("vertex {i}: labels increase"));
        }
        for (&j, &l) in ts.iter().zip(ls) {
            v.check(i < j as usize, || format!("edge {i}->{j} goes backwards"));
            v.check(l == g.radii[j as usize], || format!("edge {i}->{j} label {l}"));
            incoming[j as usize].push(i as u32);
        }
    }
    for (j, inc) in incoming.iter().enumerate() {
        v.check(inc.as_slice() == g.friends(j), || format!("vertex {j}: incoming edges differ from friends"));
    }
    v
}

/// Expansiveness, distortion at most `n - 1`, label order, representatives,
/// `sigma_min`, and the separation gap of every subtree.
pub fn hst(points: &PointSet, h: &Hst, rank_of: &[u32]) -> Violations {
    let mut v = Violations::default();
    let n = points.len();
    v.check(h.xi_factor == 3.0 * (n * n) as f64, || "xi factor".into());
    for a in 0..n {
        for b in a + 1..n {
            let (d, t) = (points.dist(a, b), h.tree_dist(a, b));
            v.check(d <= t, || format!("pair ({a},{b}): tree distance {t} < {d}"));
            v.check(t <= (n - 1) as f64 * d, || format!("pair ({a},{b}): distortion {}", t / d));
        }
    }
    for x in 0..h.node_count() as u32 {
        if let Some(p) = h.parent(x) {
            v.check(h.label(x) <= h.label(p), || format!("node {x}: label above parent"));
        }
        let below = h.points_below(x);
        let min_rank = below.iter().map(|&p| rank_of[p as usize]).min().unwrap();
        v.check(h.sigma_min(x) == min_rank, || format!("node {x}: sigma_min"));
        match h.children(x) {
            None => {
                v.check(h.label(x) == 0.0 && h.rep(x) == x, || format!("leaf {x}"));
            }
            Some([a, b]) => {
                v.check(h.rep(x) == h.rep(a) || h.rep(x) == h.rep(b), || format!("node {x}: rep"));
                v.check(h.label(x) > 0.0, || format!("node {x}: zero label"));
            }
        }
    }
    v.check(h.sigma_min(h.root()) == 0, || "sigma_min(root) is not rank 0".into());
    let gap = gap_check(h, points);
    v.checked += h.node_count();
    if gap.violations > 0 {
        v.count += gap.violations;
        v.examples.push(format!("gap property: worst ratio {}", gap.worst_ratio));
    }
    v
}

/// `anc(p, r)` equals the naive upward walk on every point for every label
/// value, zero, and values above the root label.
pub fn ancestors(h: &Hst, idx: &AncestorIndex) -> Violations {
    let mut v = Violations::default();
    let mut radii: Vec<f64> = (0..h.node_count() as u32).map(|x| h.label(x)).collect();
    radii.push(h.label(h.root()) * 2.0 + 1.0);
    let extra: Vec<f64> = radii.iter().map(|r| r * 1.5).collect();
    radii.extend(extra);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let depth_cap = idx.depth() as u64;
    for p in 0..h.leaf_count() {
        for &r in &radii {
            let (got, steps) = idx.query(h, p, r);
            let want = h.ancestor_naive(p, r);
            v.check(got == want, || format!("anc({p}, {r}) = {got}, walk gives {want}"));
            v.check(steps <= depth_cap, || "step count above decomposition depth".into());
        }
    }
    for (whole, below, above) in idx.split_sizes() {
        v.check(3 * below.max(above) <= 2 * whole + 1, || format!("unbalanced split {whole} -> {below}/{above}"));
    }
    v
}

/// Parent rule and the path properties: `R_j <= L_j <= 8 R_j`,
/// `L_j <= R_{j+1}`, `R_{j+2} >= 4 R_j` on every root path.
pub fn reverse_tree(points: &PointSet, g: &GreedyOrder, t: &ReverseTree) -> Violations {
    let mut v = Violations::default();
    let n = g.len();
    for i in 1..n {
        let par = t.parent(i).unwrap();
        let reach = PARENT_FACTOR * g.radii[i];
        v.check(par < i, || format!("rank {i}: parent {par} not earlier"));
        v.check(points.dist(g.id(i), g.id(par)) <= reach, || format!("rank {i}: parent too far"));
        let first = (0..i).find(|&j| points.dist(g.id(i), g.id(j)) <= reach);
        v.check(first == Some(par), || format!("rank {i}: parent is not the first rank in the ball"));
    }
    for start in 0..n {
        let path = t.path(start);
        let r: Vec<f64> = path.iter().map(|&x| g.radii[x]).collect();
        let l: Vec<f64> = path.windows(2).map(|w| points.dist(g.id(w[0]), g.id(w[1]))).collect();
        for j in 0..l.len() {
            v.check(r[j] <= l[j] && l[j] <= 8.0 * r[j], || format!("path from {start}, hop {j}: (A)"));
            v.check(l[j] <= r[j + 1], || format!("path from {start}, hop {j}: (B) {} > {}", l[j], r[j + 1]));
            v.check(r[j] <= r[j + 1], || format!("path from {start}, hop {j}: radii decrease"));
            if j + 2 < r.len() {
                v.check(r[j + 2] >= 4.0 * r[j], || format!("path from {start}, hop {j}: (D)"));
            }
        }
    }
    v
}

/// All single-index structural checks at once.
pub fn index(idx: &SpreadFreeIndex) -> Violations {
    let pts = idx.points();
    let mut v = greedy(pts, &idx.greedy);
    v.absorb(friends(pts, &idx.greedy));
    v.absorb(graph(&idx.greedy, &idx.graph));
    v.absorb(hst(pts, &idx.base.hst, &idx.greedy.rank_of));
    v.absorb(ancestors(&idx.base.hst, &idx.base.ancestors));
    v.absorb(reverse_tree(pts, &idx.greedy, &idx.base.reverse));
    v
}

/// Cluster diameter and closest-pair bounds, partition of each slice, and
/// cluster heads against the naive ancestor walk.
pub fn multires(mr: &MultiResIndex) -> Violations {
    let mut v = Violations::default();
    let base = &mr.base;
    for (c, cl) in mr.clusters.iter().enumerate() {
        let members = mr.members(c as u32);
        for &p in members {
            v.check(mr.cluster_of(cl.resolution, p) == Some(c as u32), || format!("cluster {c}: member {p} not mapped"));
        }
        if members.len() >= 2 {
            let st = spread_stats(&base.points.subset(members)).unwrap();
            let (hi, lo) = (pow2(cl.resolution + mr.m), pow2(cl.resolution - 2 * mr.m));
            v.check(st.diameter <= hi, || format!("cluster {c}: diameter {} > {hi}", st.diameter));
            v.check(st.closest_pair >= lo, || format!("cluster {c}: closest pair {} < {lo}", st.closest_pair));
        }
    }
    for (i, p, head) in mr.heads() {
        let want = base.hst.ancestor_naive(p as usize, pow2(i + mr.m));
        v.check(head == want, || format!("f_{i}({p}) = {head}, walk gives {want}"));
    }
    v
}

/// Per-query checks on a traced spread-free query: the start vertex is the
/// closest among all earlier ranks, visited distances shrink by `1 - eps/4`,
/// inspected destinations increase, labels lie in `[stop, c Delta]`, and the
/// hop count respects `ceil(log_{1/(1-eps/4)}(13 Delta / l*))`.
pub fn walk(idx: &SpreadFreeIndex, q: &[f64], trace: &SearchTrace, ans: &Answer, best: f64) -> Violations {
    let mut v = Violations::default();
    let eps = idx.eps();
    let pts = idx.points();
    v.check(ans.dist <= (1.0 + eps) * best, || format!("answer at {} vs nearest {best}", ans.dist));
    let Some(s1) = trace.stage1 else { return v };
    let psi = s1.psi as usize;
    let d_psi = pts.dist_to(idx.greedy.id(psi), q);
    let healthy = (0..psi).all(|r| pts.dist_to(idx.greedy.id(r), q) >= d_psi);
    v.check(healthy, || format!("start rank {psi} has a closer earlier rank"));
    for w in trace.visited.windows(2) {
        v.check(w[1].1 <= (1.0 - eps / 4.0) * w[0].1, || "visited distance did not shrink".into());
    }
    for w in trace.inspected.windows(2) {
        v.check(w[0].0 < w[1].0, || "inspected destinations not increasing".into());
    }
    let cap = idx.config.c_const * s1.delta;
    let floor = eps / 4.0 * trace.visited.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let scanned = match ans.stats.stop_reason {
        StopReason::LabelBelowThreshold => &trace.inspected[..trace.inspected.len() - 1],
        _ => &trace.inspected[..],
    };
    for &(_, label) in scanned {
        v.check(label <= cap && label >= floor, || format!("label {label} outside [{floor}, {cap}]"));
    }
    if best > 0.0 {
        let bound = ((13.0 * s1.delta / best).ln() / (1.0 / (1.0 - eps / 4.0)).ln()).ceil();
        v.check(ans.stats.hops as f64 <= bound, || format!("{} hops above bound {bound}", ans.stats.hops));
    }
    v
}

/// Number of inspected edges per dyadic label band `[2^i, 2^(i+1))`.
pub fn band_counts(trace: &SearchTrace) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for &(_, label) in &trace.inspected {
        if label > 0.0 {
            *out.entry(resolution(label)).or_default() += 1;
        }
    }
    out
}
