//! Two-stage search whose cost depends on `n` and `eps` but not on the spread.
//!
//! Stage I turns a rough answer `(p, l)` into a start vertex whose radius
//! sits a polynomial factor above `l`: `u = anc(p, Gamma)` with
//! `Gamma = 3 n^4 l / eps`, the lowest greedy rank `tau` below `u`, a
//! reverse-tree climb to the first rank with radius above
//! `Delta = n^2 Gamma`, and the closest of that rank and its friends.
//! Stage II walks the graph from there, skipping edges labelled above
//! `c Delta` and stopping once a label drops below `(eps/4) d(q, current)`.

use std::sync::Arc;

use crate::error::{config, Result};
use crate::greedy::{build_greedy, check_c, check_eps, GreedyOrder, MIN_FRIENDS_CONST};
use crate::hst::{AncestorIndex, Hst};
use crate::metric::PointSet;
use crate::nav_graph::{baseline_search, NavGraph};
use crate::reverse_tree::ReverseTree;
use crate::rough::{RoughAnn, RoughKind};
use crate::stats::{QueryStats, SearchTrace, Stage1Trace, StopReason};

/// Largest supported point count; keeps `n^6 / eps` finite.
pub const MAX_POINTS: usize = 1_000_000;

/// Default back-jump factor `B` of the bootstrapped query.
pub const DEFAULT_BOOTSTRAP_FACTOR: f64 = 8.0;

/// Accuracy of the coarse index used by the bootstrapped query.
pub const COARSE_EPS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexConfig {
    pub eps: f64,
    pub c_const: f64,
    pub start_id: usize,
    pub seed: u64,
    pub rough: RoughKind,
    pub bootstrap_factor: f64,
}

impl IndexConfig {
    pub fn new(eps: f64) -> Self {
        IndexConfig {
            eps,
            c_const: MIN_FRIENDS_CONST,
            start_id: 0,
            seed: 0,
            rough: RoughKind::Quadtree,
            bootstrap_factor: DEFAULT_BOOTSTRAP_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_c(self.c_const)?;
        if !(self.bootstrap_factor > 0.0 && self.bootstrap_factor.is_finite()) {
            return config(format!("bootstrap factor must be positive, got {}", self.bootstrap_factor));
        }
        Ok(())
    }
}

/// Structures that do not depend on `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseIndex {
    pub points: PointSet,
    pub hst: Hst,
    pub ancestors: AncestorIndex,
    pub reverse: ReverseTree,
    pub rough: RoughAnn,
}

/// A search result with its true distance and work counters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Answer {
    pub id: usize,
    pub dist: f64,
    pub stats: QueryStats,
}

/// Outcome of Stage I.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Start {
    /// The rough answer coincides with the query.
    Exact { id: usize },
    /// Stage II starts at `rank` (at distance `dist`) with threshold `delta`.
    Walk { rank: usize, dist: f64, delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpreadFreeIndex {
    pub base: Arc<BaseIndex>,
    pub greedy: GreedyOrder,
    pub graph: NavGraph,
    pub config: IndexConfig,
}

impl SpreadFreeIndex {
    pub fn build(points: PointSet, cfg: IndexConfig) -> Result<Self> {
        cfg.validate()?;
        if points.len() > MAX_POINTS {
            return config(format!("at most {MAX_POINTS} points are supported, got {}", points.len()));
        }
        let (order, radii) = build_greedy(&points, cfg.start_id)?;
        let greedy = GreedyOrder::from_permutation(&points, order, radii, cfg.eps, cfg.c_const)?;
        let graph = NavGraph::build(&greedy);
        let hst = Hst::build(&points, &greedy.rank_of);
        let ancestors = AncestorIndex::build(&hst);
        let reverse = ReverseTree::build(&points, &greedy);
        let rough = RoughAnn::build(&points, cfg.rough, cfg.seed);
        let base = Arc::new(BaseIndex { points, hst, ancestors, reverse, rough });
        Ok(SpreadFreeIndex { base, greedy, graph, config: cfg })
    }

    pub(crate) fn from_parts(base: Arc<BaseIndex>, greedy: GreedyOrder, graph: NavGraph, config: IndexConfig) -> Self {
        SpreadFreeIndex { base, greedy, graph, config }
    }

    /// Same permutation and shared structures, friends and graph for `eps`.
    pub fn sibling(&self, eps: f64) -> Result<Self> {
        let cfg = IndexConfig { eps, ..self.config };
        cfg.validate()?;
        let greedy = GreedyOrder::from_permutation(
            &self.base.points,
            self.greedy.order.clone(),
            self.greedy.radii.clone(),
            eps,
            cfg.c_const,
        )?;
        let graph = NavGraph::build(&greedy);
        Ok(SpreadFreeIndex { base: Arc::clone(&self.base), greedy, graph, config: cfg })
    }

    pub fn points(&self) -> &PointSet {
        &self.base.points
    }

    pub fn eps(&self) -> f64 {
        self.config.eps
    }

    pub fn len(&self) -> usize {
        self.greedy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.greedy.is_empty()
    }

    /// The Stage I thresholds `(Gamma, Delta)` for a rough distance `l`.
    pub fn thresholds(&self, l: f64) -> (f64, f64) {
        let n = self.len() as f64;
        let gamma = 3.0 * n.powi(4) * l / self.eps();
        (gamma, n * n * gamma)
    }

    /// Closest of `rank` and its friends; ties to the lowest rank.
    fn best_of_friends(&self, q: &[f64], rank: usize, stats: &mut QueryStats) -> (usize, f64) {
        let pts = &self.base.points;
        let mut best = (rank, f64::INFINITY);
        for &j in self.greedy.friends(rank).iter().chain(std::iter::once(&(rank as u32))) {
            let d = pts.dist_to(self.greedy.id(j as usize), q);
            stats.friends_scanned += 1;
            stats.dist_evals += 1;
            if d < best.1 {
                best = (j as usize, d);
            }
        }
        best
    }

    pub fn stage1(&self, q: &[f64], stats: &mut QueryStats, trace: Option<&mut SearchTrace>) -> Result<Start> {
        let base = &*self.base;
        let hit = base.rough.query(&base.points, q)?;
        stats.rough_time_steps += hit.steps;
        stats.dist_evals += 1;
        if hit.dist == 0.0 || self.len() == 1 {
            return Ok(Start::Exact { id: hit.id });
        }
        let (gamma, delta) = self.thresholds(hit.dist);
        let (u, anc_steps) = base.ancestors.query(&base.hst, hit.id, gamma);
        stats.ancestor_steps += anc_steps;
        let tau = base.hst.sigma_min(u) as usize;
        let (xi, rev_steps) = base.reverse.ascend(&self.greedy.radii, tau, delta);
        stats.reverse_steps += rev_steps;
        let (psi, dist) = self.best_of_friends(q, xi, stats);
        if let Some(t) = trace {
            t.stage1 = Some(Stage1Trace {
                rough_id: hit.id as u32,
                rough_dist: hit.dist,
                gamma,
                delta,
                hst_node: u,
                tau: tau as u32,
                xi: xi as u32,
                psi: psi as u32,
            });
        }
        Ok(Start::Walk { rank: psi, dist, delta })
    }

    /// Forward-scanning walk from `start`; returns the final rank and its distance.
    pub fn stage2(
        &self,
        q: &[f64],
        start: usize,
        start_dist: f64,
        delta: f64,
        stats: &mut QueryStats,
        mut trace: Option<&mut SearchTrace>,
    ) -> (usize, f64) {
        let eps = self.eps();
        let shrink = 1.0 - eps / 4.0;
        let pts = &self.base.points;
        let (mut cur, mut cur_d) = (start, start_dist);
        if let Some(t) = trace.as_deref_mut() {
            t.visited.push((cur as u32, cur_d));
        }
        let cap = self.config.c_const * delta;
        let mut at = self.graph.out_labels(cur).partition_point(|&l| l > cap);
        stats.stop_reason = StopReason::ListExhausted;
        'walk: loop {
            let targets = self.graph.out_edges(cur);
            let labels = self.graph.out_labels(cur);
            while at < targets.len() {
                let (j, label) = (targets[at] as usize, labels[at]);
                at += 1;
                stats.edges_scanned += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.inspected.push((j as u32, label));
                }
                if label < eps / 4.0 * cur_d {
                    stats.stop_reason = StopReason::LabelBelowThreshold;
                    break 'walk;
                }
                let d = pts.dist_to(self.greedy.id(j), q);
                stats.dist_evals += 1;
                if d <= shrink * cur_d {
                    cur = j;
                    cur_d = d;
                    stats.hops += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.visited.push((j as u32, d));
                    }
                    // Keep destinations increasing across lists.
                    at = self.graph.out_edges(cur).partition_point(|&t| t as usize <= j);
                    continue 'walk;
                }
            }
            break;
        }
        (cur, cur_d)
    }

    pub fn query(&self, q: &[f64]) -> Result<Answer> {
        self.query_traced(q, None)
    }

    pub fn query_traced(&self, q: &[f64], mut trace: Option<&mut SearchTrace>) -> Result<Answer> {
        let mut stats = QueryStats::default();
        match self.stage1(q, &mut stats, trace.as_deref_mut())? {
            Start::Exact { id } => {
                let dist = self.base.points.dist_to(id, q);
                stats.stop_reason = if dist == 0.0 { StopReason::ExactHit } else { StopReason::ListExhausted };
                Ok(Answer { id, dist, stats })
            }
            Start::Walk { rank, dist, delta } => {
                let (r, d) = self.stage2(q, rank, dist, delta, &mut stats, trace);
                Ok(Answer { id: self.greedy.id(r), dist: d, stats })
            }
        }
    }

    /// Greedy routing from rank 0 over this index's graph.
    pub fn baseline(&self, q: &[f64]) -> Result<Answer> {
        self.base.points.check_query(q)?;
        let (id, stats) = baseline_search(&self.graph, &self.base.points, &self.greedy, q, self.eps(), None);
        Ok(Answer { id, dist: self.base.points.dist_to(id, q), stats })
    }
}

/// Work split of a bootstrapped query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapAnswer {
    pub answer: Answer,
    /// Counters of the coarse query alone.
    pub coarse: QueryStats,
    /// Counters of the fine back-jump and walk alone.
    pub fine: QueryStats,
}

/// Coarse `(1 + 1/2)`-ANN first, then a fine walk started from the reverse-tree
/// ancestor of the coarse answer whose radius exceeds `B l / eps_fine`.
pub fn bootstrap_query(
    coarse: &SpreadFreeIndex,
    fine: &SpreadFreeIndex,
    q: &[f64],
    trace: Option<&mut SearchTrace>,
) -> Result<BootstrapAnswer> {
    debug_assert!(Arc::ptr_eq(&coarse.base, &fine.base) || coarse.base == fine.base);
    let first = coarse.query(q)?;
    let mut stats = QueryStats::default();
    if first.dist == 0.0 {
        let mut merged = first.stats;
        merged.stop_reason = StopReason::ExactHit;
        return Ok(BootstrapAnswer { answer: Answer { stats: merged, ..first }, coarse: first.stats, fine: stats });
    }
    let delta = fine.config.bootstrap_factor * first.dist / fine.eps();
    let from = fine.greedy.rank_of[first.id] as usize;
    let (xi, steps) = fine.base.reverse.ascend(&fine.greedy.radii, from, delta);
    stats.reverse_steps += steps;
    let (psi, d) = fine.best_of_friends(q, xi, &mut stats);
    let (r, dist) = fine.stage2(q, psi, d, delta, &mut stats, trace);
    let merged = merge(first.stats, stats);
    Ok(BootstrapAnswer { answer: Answer { id: fine.greedy.id(r), dist, stats: merged }, coarse: first.stats, fine: stats })
}

/// Sums counters; the stop reason comes from `b`.
pub fn merge(a: QueryStats, b: QueryStats) -> QueryStats {
    QueryStats {
        rough_time_steps: a.rough_time_steps + b.rough_time_steps,
        ancestor_steps: a.ancestor_steps + b.ancestor_steps,
        reverse_steps: a.reverse_steps + b.reverse_steps,
        friends_scanned: a.friends_scanned + b.friends_scanned,
        hops: a.hops + b.hops,
        edges_scanned: a.edges_scanned + b.edges_scanned,
        dist_evals: a.dist_evals + b.dist_evals,
        stop_reason: b.stop_reason,
    }
}
