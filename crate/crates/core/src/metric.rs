//! Points, the Euclidean metric, and the exhaustive nearest-neighbor oracle.
//!
//! Every other module evaluates distances through [`PointSet::dist_to`] or
//! [`dist`], so swapping the metric only touches this file.

use crate::error::{input, Result};

/// An immutable set of pairwise-distinct points in `R^dim`.
///
/// Point `i` has original id `i`. Coordinates are stored row-major in a flat
/// buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Validates and wraps a flat row-major coordinate buffer.
    ///
    /// Rejects empty sets, non-finite coordinates, ragged input and duplicate
    /// points. Negative zero is normalized to positive zero.
    pub fn new(dim: usize, mut coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return input("dimension must be positive");
        }
        if coords.is_empty() {
            return input("point set must contain at least one point");
        }
        if !coords.len().is_multiple_of(dim) {
            return input(format!(
                "coordinate count {} is not a multiple of dimension {dim}",
                coords.len()
            ));
        }
        for (k, c) in coords.iter_mut().enumerate() {
            if !c.is_finite() {
                return input(format!("point {} has a non-finite coordinate", k / dim));
            }
            *c += 0.0;
        }
        let set = PointSet { dim, coords };
        if let Some((a, b)) = set.find_duplicate() {
            return input(format!("points {a} and {b} are identical"));
        }
        Ok(set)
    }

    /// Builds a point set from a list of equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return input("point set must contain at least one point");
        };
        let dim = first.len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return input(format!("point {i} has {} coordinates, expected {dim}", row.len()));
            }
            coords.extend_from_slice(row);
        }
        PointSet::new(dim, coords)
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut ids: Vec<usize> = (0..self.len()).collect();
        ids.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        ids.windows(2)
            .find(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Distance between two stored points.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        l2(self.point(a), self.point(b))
    }

    /// Distance from a stored point to an arbitrary query of the same dimension.
    #[inline]
    pub fn dist_to(&self, id: usize, q: &[f64]) -> f64 {
        l2(self.point(id), q)
    }

    /// Copies the listed points into a new set, preserving the given order.
    pub fn subset(&self, ids: &[u32]) -> PointSet {
        let mut coords = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            coords.extend_from_slice(self.point(id as usize));
        }
        PointSet { dim: self.dim, coords }
    }

    pub(crate) fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim {
            return input(format!("query has dimension {}, index has {}", q.len(), self.dim));
        }
        if q.iter().any(|c| !c.is_finite()) {
            return input("query has a non-finite coordinate");
        }
        Ok(())
    }
}

/// Euclidean distance with an overflow/underflow-safe fallback.
#[inline]
pub(crate) fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    if s.is_finite() && s >= f64::MIN_POSITIVE {
        return s.sqrt();
    }
    if s == 0.0 && a == b {
        return 0.0;
    }
    // Huge or tiny coordinates: rescale by the largest component.
    let scale = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let t: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y) / scale;
            d * d
        })
        .sum();
    scale * t.sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return input(format!("dimension mismatch: {} vs {}", a.len(), b.len()));
    }
    Ok(l2(a, b))
}

/// Exact nearest neighbor by full scan. Ties go to the lowest id.
pub fn brute_force_nn(points: &PointSet, q: &[f64]) -> Result<(usize, f64)> {
    if q.len() != points.dim() {
        return input(format!("query has dimension {}, points have {}", q.len(), points.dim()));
    }
    let mut best = (0, points.dist_to(0, q));
    for id in 1..points.len() {
        let d = points.dist_to(id, q);
        if d < best.1 {
            best = (id, d);
        }
    }
    Ok(best)
}

/// Diameter, closest-pair distance and their ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadStats {
    pub diameter: f64,
    pub closest_pair: f64,
    pub spread: f64,
}

/// Exact spread statistics by an O(n^2) scan over all pairs.
pub fn spread_stats(points: &PointSet) -> Result<SpreadStats> {
    let n = points.len();
    if n < 2 {
        return input("spread is undefined for fewer than two points");
    }
    let mut diameter = 0.0f64;
    let mut closest_pair = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            let d = points.dist(a, b);
            diameter = diameter.max(d);
            closest_pair = closest_pair.min(d);
        }
    }
    Ok(SpreadStats { diameter, closest_pair, spread: diameter / closest_pair })
}

/// Exact `floor(log2 r)` for positive finite `r`.
pub fn resolution(r: f64) -> i32 {
    debug_assert!(r > 0.0 && r.is_finite());
    let bits = r.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        // Subnormal: value = frac * 2^-1074.
        let frac = bits & ((1u64 << 52) - 1);
        return 63 - frac.leading_zeros() as i32 - 1074;
    }
    exp - 1023
}

/// Splits a finite double into `(mantissa, exponent)` with `x = mantissa * 2^exponent`.
pub(crate) fn decompose(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    (if negative { -mant } else { mant }, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(dist(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(dist(&[1.0], &[-2.0]).unwrap(), 3.0);
        assert!(matches!(dist(&[1.0], &[1.0, 2.0]), Err(crate::Error::Input(_))));
    }

    #[test]
    fn dist_survives_extreme_magnitudes() {
        let big = 2f64.powi(899);
        assert_eq!(dist(&[0.0, big], &[0.0, 0.0]).unwrap(), big);
        let tiny = f64::MIN_POSITIVE * 4.0;
        assert_eq!(dist(&[tiny], &[0.0]).unwrap(), tiny);
        let d = dist(&[3.0 * big, 0.0], &[0.0, 4.0 * big]).unwrap();
        assert!((d / (5.0 * big) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brute_force_examples() {
        let p = line(&[0.0, 10.0, 4.0, 7.0]);
        assert_eq!(brute_force_nn(&p, &[6.0]).unwrap(), (3, 1.0));
        assert_eq!(brute_force_nn(&p, &[4.0]).unwrap(), (2, 0.0));
        let single = line(&[5.0]);
        assert_eq!(brute_force_nn(&single, &[-100.0]).unwrap().0, 0);
        // equidistant: lowest id wins
        assert_eq!(brute_force_nn(&line(&[2.0, 0.0]), &[1.0]).unwrap().0, 0);
    }

    #[test]
    fn spread_examples() {
        let s = spread_stats(&line(&[0.0, 1.0, 4.0])).unwrap();
        assert_eq!((s.diameter, s.closest_pair, s.spread), (4.0, 1.0, 4.0));
        assert_eq!(spread_stats(&line(&[2.0, 9.0])).unwrap().spread, 1.0);
        let k = 20;
        let chain: Vec<f64> = (0..=k).map(|i| 2f64.powi(i)).collect();
        let s = spread_stats(&line(&chain)).unwrap();
        assert_eq!(s.closest_pair, 1.0);
        assert_eq!(s.diameter, 2f64.powi(k) - 1.0);
        assert_eq!(s.spread, 2f64.powi(k) - 1.0);
        assert!(spread_stats(&line(&[1.0])).is_err());
    }

    #[test]
    fn ingestion_rejects_bad_input() {
        assert!(PointSet::new(2, vec![0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(PointSet::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(PointSet::new(1, vec![f64::NAN]).is_err());
        assert!(PointSet::new(1, vec![]).is_err());
        assert!(PointSet::new(1, vec![-0.0, 0.0]).is_err());
        assert!(PointSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn resolution_is_exact_floor_log2() {
        assert_eq!(resolution(1.0), 0);
        assert_eq!(resolution(5.0), 2);
        assert_eq!(resolution(4.0), 2);
        assert_eq!(resolution(3.999999999), 1);
        assert_eq!(resolution(0.5), -1);
        assert_eq!(resolution(0.75), -1);
        assert_eq!(resolution(f64::MIN_POSITIVE), -1022);
        assert_eq!(resolution(f64::MIN_POSITIVE / 8.0), -1025);
        assert_eq!(resolution(2f64.powi(899) * 1.5), 899);
    }

    #[test]
    fn decompose_roundtrips() {
        for x in [1.0, -3.25, 0.1, 2f64.powi(700), f64::MIN_POSITIVE / 3.0, 0.0] {
            let (m, e) = decompose(x);
            assert_eq!(m as f64 * 2f64.powi(e), x);
        }
    }

    fn sorted_nn(points: &PointSet, q: &[f64]) -> (usize, f64) {
        let mut all: Vec<(f64, usize)> =
            points.iter().enumerate().map(|(i, p)| (dist(p, q).unwrap(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        (all[0].1, all[0].0)
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(-1e3f64..1e3, 3),
            b in prop::collection::vec(-1e3f64..1e3, 3),
            c in prop::collection::vec(-1e3f64..1e3, 3),
        ) {
            let ab = dist(&a, &b).unwrap();
            let bc = dist(&b, &c).unwrap();
            let ac = dist(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9 * (ab + bc));
            prop_assert_eq!(ab, dist(&b, &a).unwrap());
        }

        #[test]
        fn brute_force_matches_sorted_scan(
            pts in prop::collection::vec(prop::collection::vec(-100f64..100.0, 2), 1..40),
            q in prop::collection::vec(-120f64..120.0, 2),
        ) {
            let mut seen = std::collections::HashSet::new();
            let rows: Vec<Vec<f64>> = pts
                .into_iter()
                .filter(|p| seen.insert((p[0].to_bits(), p[1].to_bits())))
                .collect();
            let set = PointSet::from_rows(&rows).unwrap();
            prop_assert_eq!(brute_force_nn(&set, &q).unwrap(), sorted_nn(&set, &q));
        }
    }
}
