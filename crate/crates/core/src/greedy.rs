//! Exact greedy (farthest-point) permutation, its radii, and friends lists.
//!
//! Ranks are 0-based here: rank 0 is the start point, and `radii[0]` is the
//! largest distance from it. A friend of rank `i` is any earlier rank within
//! `c * radii[i] / eps` of it.

use crate::error::{config, input, Result};
use crate::metric::PointSet;

/// Smallest allowed friends-ball constant.
pub const MIN_FRIENDS_CONST: f64 = 26.0;

/// The greedy permutation of a point set plus its friends lists.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyOrder {
    /// rank -> original id
    pub order: Vec<u32>,
    /// original id -> rank
    pub rank_of: Vec<u32>,
    /// `radii[i]` = distance of rank `i` to ranks `0..i` (rank 0: farthest distance from it).
    pub radii: Vec<f64>,
    pub(crate) friend_offsets: Vec<usize>,
    pub(crate) friend_ranks: Vec<u32>,
    pub c_const: f64,
    pub eps: f64,
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return config(format!("epsilon must lie in (0, 1/2], got {eps}"));
    }
    Ok(())
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if !(c >= MIN_FRIENDS_CONST && c.is_finite()) {
        return config(format!("friends constant must be at least {MIN_FRIENDS_CONST}, got {c}"));
    }
    Ok(())
}

/// Exact greedy permutation starting at `start`, in O(n^2) distance evaluations.
///
/// Ties on the farthest distance go to the lowest original id.
pub fn build_greedy(points: &PointSet, start: usize) -> Result<(Vec<u32>, Vec<f64>)> {
    let n = points.len();
    if start >= n {
        return input(format!("start id {start} out of range for {n} points"));
    }
    let mut order = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    // Distance to the current prefix; NEG_INFINITY marks points already taken.
    let mut to_prefix: Vec<f64> = (0..n).map(|p| points.dist(p, start)).collect();
    to_prefix[start] = f64::NEG_INFINITY;
    order.push(start as u32);
    radii.push(to_prefix.iter().cloned().fold(0.0, f64::max));
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut far = f64::NEG_INFINITY;
        for (p, &d) in to_prefix.iter().enumerate() {
            if d > far {
                far = d;
                next = p;
            }
        }
        order.push(next as u32);
        radii.push(far);
        to_prefix[next] = f64::NEG_INFINITY;
        for (p, d) in to_prefix.iter_mut().enumerate() {
            if *d > 0.0 {
                *d = d.min(points.dist(p, next));
            }
        }
    }
    Ok((order, radii))
}

/// Friends lists by direct scan: for each rank, the earlier ranks within
/// `c * r / eps`, ascending. Returned in flat offset form.
pub fn build_friends(
    points: &PointSet,
    order: &[u32],
    radii: &[f64],
    eps: f64,
    c_const: f64,
) -> Result<(Vec<usize>, Vec<u32>)> {
    check_eps(eps)?;
    check_c(c_const)?;
    let mut offsets = Vec::with_capacity(order.len() + 1);
    let mut ranks = Vec::new();
    offsets.push(0);
    for i in 0..order.len() {
        let reach = c_const * radii[i] / eps;
        let pi = order[i] as usize;
        for (j, &pj) in order[..i].iter().enumerate() {
            if points.dist(pi, pj as usize) <= reach {
                ranks.push(j as u32);
            }
        }
        offsets.push(ranks.len());
    }
    Ok((offsets, ranks))
}

impl GreedyOrder {
    /// Greedy permutation from `start` plus friends lists for `eps` and `c_const`.
    pub fn build(points: &PointSet, start: usize, eps: f64, c_const: f64) -> Result<Self> {
        check_eps(eps)?;
        check_c(c_const)?;
        let (order, radii) = build_greedy(points, start)?;
        Self::from_permutation(points, order, radii, eps, c_const)
    }

    /// Recomputes friends lists for an existing permutation.
    pub fn from_permutation(
        points: &PointSet,
        order: Vec<u32>,
        radii: Vec<f64>,
        eps: f64,
        c_const: f64,
    ) -> Result<Self> {
        let (friend_offsets, friend_ranks) = build_friends(points, &order, &radii, eps, c_const)?;
        let mut rank_of = vec![0u32; order.len()];
        for (r, &id) in order.iter().enumerate() {
            rank_of[id as usize] = r as u32;
        }
        Ok(GreedyOrder { order, rank_of, radii, friend_offsets, friend_ranks, c_const, eps })
    }

    pub(crate) fn from_parts(
        order: Vec<u32>,
        radii: Vec<f64>,
        friend_offsets: Vec<usize>,
        friend_ranks: Vec<u32>,
        c_const: f64,
        eps: f64,
    ) -> Self {
        let mut rank_of = vec![0u32; order.len()];
        for (r, &id) in order.iter().enumerate() {
            rank_of[id as usize] = r as u32;
        }
        GreedyOrder { order, rank_of, radii, friend_offsets, friend_ranks, c_const, eps }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Earlier ranks within the friends ball of `rank`, ascending.
    pub fn friends(&self, rank: usize) -> &[u32] {
        &self.friend_ranks[self.friend_offsets[rank]..self.friend_offsets[rank + 1]]
    }

    pub fn total_friends(&self) -> usize {
        self.friend_ranks.len()
    }

    /// Original id of the point at `rank`.
    #[inline]
    pub fn id(&self, rank: usize) -> usize {
        self.order[rank] as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, DatasetKind};

    fn example() -> PointSet {
        PointSet::new(1, vec![0.0, 10.0, 4.0, 7.0]).unwrap()
    }

    #[test]
    fn hand_executed_example() {
        let (order, radii) = build_greedy(&example(), 0).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3]);
        assert_eq!(radii, vec![10.0, 10.0, 4.0, 3.0]);
    }

    #[test]
    fn friends_of_example() {
        let g = GreedyOrder::build(&example(), 0, 0.5, 26.0).unwrap();
        // rank 2 (point 4): ball radius 26 * 4 / 0.5 = 208 holds both earlier points
        assert_eq!(g.friends(2), &[0, 1]);
        assert_eq!(g.friends(1), &[0]);
        assert_eq!(g.friends(0), &[] as &[u32]);
        assert_eq!(g.total_friends(), 6);
    }

    #[test]
    fn two_points() {
        let p = PointSet::new(2, vec![0.0, 0.0, 3.0, 4.0]).unwrap();
        let (order, radii) = build_greedy(&p, 1).unwrap();
        assert_eq!(order, vec![1, 0]);
        assert_eq!(radii, vec![5.0, 5.0]);
    }

    #[test]
    fn single_point_has_zero_radius() {
        let p = PointSet::new(1, vec![3.0]).unwrap();
        let g = GreedyOrder::build(&p, 0, 0.25, 26.0).unwrap();
        assert_eq!(g.radii, vec![0.0]);
        assert_eq!(g.total_friends(), 0);
    }

    #[test]
    fn config_errors() {
        let p = example();
        assert!(GreedyOrder::build(&p, 0, 0.0, 26.0).is_err());
        assert!(GreedyOrder::build(&p, 0, 0.51, 26.0).is_err());
        assert!(GreedyOrder::build(&p, 0, 0.25, 25.9).is_err());
        assert!(GreedyOrder::build(&p, 0, 0.5, 40.0).is_ok());
        assert!(build_greedy(&p, 4).is_err());
    }

    #[test]
    fn ties_go_to_lowest_id() {
        // 1 and 2 are both at distance 1 from 0
        let p = PointSet::new(1, vec![0.0, 1.0, -1.0]).unwrap();
        let (order, _) = build_greedy(&p, 0).unwrap();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn smaller_eps_only_grows_friends() {
        let p = gen_dataset(DatasetKind::Uniform, 120, 2, 4).unwrap();
        let coarse = GreedyOrder::build(&p, 0, 0.5, 26.0).unwrap();
        let fine = GreedyOrder::build(&p, 0, 0.1, 26.0).unwrap();
        for i in 0..p.len() {
            let f: std::collections::HashSet<_> = fine.friends(i).iter().collect();
            assert!(coarse.friends(i).iter().all(|r| f.contains(r)));
            if i > 0 {
                assert!(!coarse.friends(i).is_empty());
            }
        }
    }
}
