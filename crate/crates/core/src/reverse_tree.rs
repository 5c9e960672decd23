//! Reverse tree over greedy ranks: each rank points to the first earlier
//! rank within `8 r_i`. Radii at least quadruple every two hops upward.

use crate::greedy::GreedyOrder;
use crate::metric::PointSet;

/// Ball factor for parent selection.
pub const PARENT_FACTOR: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReverseTree {
    /// `parent[0] == 0`; `parent[i] < i` otherwise.
    pub(crate) parent: Vec<u32>,
}

impl ReverseTree {
    pub fn build(points: &PointSet, greedy: &GreedyOrder) -> ReverseTree {
        let n = greedy.len();
        let mut parent = vec![0u32; n];
        for i in 1..n {
            let reach = PARENT_FACTOR * greedy.radii[i];
            let pi = greedy.id(i);
            // The nearest prefix point is within r_i, so the scan always stops.
            parent[i] = (0..i)
                .find(|&j| points.dist(pi, greedy.id(j)) <= reach)
                .expect("nearest prefix point lies within r_i") as u32;
        }
        ReverseTree { parent }
    }

    pub(crate) fn from_parts(parent: Vec<u32>) -> ReverseTree {
        ReverseTree { parent }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Parent rank, `None` for the root (rank 0).
    pub fn parent(&self, rank: usize) -> Option<usize> {
        (rank != 0).then(|| self.parent[rank] as usize)
    }

    /// First rank on the path from `start` to the root (inclusive) whose
    /// radius exceeds `delta`; rank 0 if none does. Also returns the hop count.
    pub fn ascend(&self, radii: &[f64], start: usize, delta: f64) -> (usize, u64) {
        let mut at = start;
        let mut steps = 0;
        while radii[at] <= delta {
            match self.parent(at) {
                Some(p) => {
                    at = p;
                    steps += 1;
                }
                None => break,
            }
        }
        (at, steps)
    }

    /// Ranks from `start` up to and including the root.
    pub fn path(&self, start: usize) -> Vec<usize> {
        let mut out = vec![start];
        let mut at = start;
        while let Some(p) = self.parent(at) {
            out.push(p);
            at = p;
        }
        out
    }
}
