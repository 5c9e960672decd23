//! Navigable DAG over greedy ranks and the baseline greedy-routing search.
//!
//! There is an edge `i -> j` whenever `i` is a friend of `j`. Outgoing lists
//! are stored flat, sorted by destination rank, with the destination radius
//! kept alongside as the edge label. Since radii never increase along the
//! permutation, each label list is non-increasing.

use crate::greedy::GreedyOrder;
use crate::metric::PointSet;
use crate::stats::{QueryStats, SearchTrace, StopReason};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NavGraph {
    pub(crate) offsets: Vec<usize>,
    pub(crate) targets: Vec<u32>,
    pub(crate) labels: Vec<f64>,
}

impl NavGraph {
    /// Reverses the friends lists into sorted outgoing adjacency.
    pub fn build(greedy: &GreedyOrder) -> NavGraph {
        let n = greedy.len();
        let mut degree = vec![0usize; n];
        for j in 0..n {
            for &i in greedy.friends(j) {
                degree[i as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let total = offsets[n];
        let mut targets = vec![0u32; total];
        let mut labels = vec![0f64; total];
        let mut fill = offsets[..n].to_vec();
        // Ascending j makes every list sorted without a sort.
        for j in 0..n {
            for &i in greedy.friends(j) {
                let slot = &mut fill[i as usize];
                targets[*slot] = j as u32;
                labels[*slot] = greedy.radii[j];
                *slot += 1;
            }
        }
        NavGraph { offsets, targets, labels }
    }

    pub(crate) fn from_parts(offsets: Vec<usize>, targets: Vec<u32>, labels: Vec<f64>) -> Self {
        NavGraph { offsets, targets, labels }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn out_edges(&self, rank: usize) -> &[u32] {
        &self.targets[self.offsets[rank]..self.offsets[rank + 1]]
    }

    pub fn out_labels(&self, rank: usize) -> &[f64] {
        &self.labels[self.offsets[rank]..self.offsets[rank + 1]]
    }
}

/// Impulsive greedy routing from rank 0.
///
/// Scans outgoing edges by ascending destination; the first destination
/// with `d(q, p_j) <= (1 - eps/4) d(q, current)` becomes the current vertex
/// and its list is scanned from the start. Returns the original id of the
/// vertex whose full list produced no jump.
pub fn baseline_search(
    graph: &NavGraph,
    points: &PointSet,
    greedy: &GreedyOrder,
    q: &[f64],
    eps: f64,
    mut trace: Option<&mut SearchTrace>,
) -> (usize, QueryStats) {
    let mut stats = QueryStats::default();
    let shrink = 1.0 - eps / 4.0;
    let mut cur = 0usize;
    let mut cur_d = points.dist_to(greedy.id(0), q);
    stats.dist_evals += 1;
    if let Some(t) = trace.as_deref_mut() {
        t.visited.push((0, cur_d));
    }
    'walk: loop {
        for (&j, &label) in graph.out_edges(cur).iter().zip(graph.out_labels(cur)) {
            stats.edges_scanned += 1;
            let d = points.dist_to(greedy.id(j as usize), q);
            stats.dist_evals += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.inspected.push((j, label));
            }
            if d <= shrink * cur_d {
                cur = j as usize;
                cur_d = d;
                stats.hops += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.visited.push((j, d));
                }
                continue 'walk;
            }
        }
        break;
    }
    stats.stop_reason = StopReason::ListExhausted;
    (greedy.id(cur), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, gen_queries, DatasetKind};
    use crate::metric::brute_force_nn;

    fn example() -> (PointSet, GreedyOrder, NavGraph) {
        let p = PointSet::new(1, vec![0.0, 10.0, 4.0, 7.0]).unwrap();
        let g = GreedyOrder::build(&p, 0, 0.5, 26.0).unwrap();
        let graph = NavGraph::build(&g);
        (p, g, graph)
    }

    #[test]
    fn example_edges() {
        let (_, _, graph) = example();
        let mut edges = Vec::new();
        for i in 0..4 {
            for &j in graph.out_edges(i) {
                edges.push((i + 1, j as usize + 1));
            }
        }
        edges.sort();
        assert_eq!(edges, vec![(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(graph.out_labels(0), &[10.0, 4.0, 3.0]);
    }

    #[test]
    fn two_points_single_edge() {
        let p = PointSet::new(1, vec![0.0, 1.0]).unwrap();
        let g = GreedyOrder::build(&p, 0, 0.25, 26.0).unwrap();
        let graph = NavGraph::build(&g);
        assert_eq!(graph.edge_count(), 1);
        assert_eq!(graph.out_edges(0), &[1]);
    }

    #[test]
    fn example_query() {
        let (p, g, graph) = example();
        let (ans, stats) = baseline_search(&graph, &p, &g, &[6.0], 0.5, None);
        assert_eq!(ans, 3);
        assert!(stats.hops >= 1);
        let (hit, _) = baseline_search(&graph, &p, &g, &[4.0], 0.5, None);
        assert_eq!(hit, 2);
    }

    #[test]
    fn baseline_is_ann_and_progress_is_geometric() {
        for (seed, dim, eps) in [(1u64, 2usize, 0.25), (2, 4, 0.1), (3, 1, 0.49)] {
            let p = gen_dataset(DatasetKind::Uniform, 300, dim, seed).unwrap();
            let g = GreedyOrder::build(&p, 0, eps, 26.0).unwrap();
            let graph = NavGraph::build(&g);
            for q in gen_queries(&p, 60, seed) {
                let mut trace = SearchTrace::default();
                let (ans, stats) = baseline_search(&graph, &p, &g, &q, eps, Some(&mut trace));
                let (_, best) = brute_force_nn(&p, &q).unwrap();
                assert!(p.dist_to(ans, &q) <= (1.0 + eps) * best);
                for w in trace.visited.windows(2) {
                    assert!(w[1].1 <= (1.0 - eps / 4.0) * w[0].1);
                }
                if best > 0.0 {
                    let bound = ((trace.visited[0].1 / best).ln() / (1.0 / (1.0 - eps / 4.0)).ln()).ceil();
                    assert!(stats.hops as f64 <= bound);
                }
            }
        }
    }
}
