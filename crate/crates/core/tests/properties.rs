//! Property tests over arbitrary point sets, including wide coordinate scales.

use std::collections::HashSet;

use proptest::prelude::*;
use sfann::metric::brute_force_nn;
use sfann::{bootstrap_query, verify, Index, IndexConfig, PointSet, RoughKind, SearchTrace};

/// Distinct points whose coordinates span many binary orders of magnitude.
fn point_set(max_n: usize) -> impl Strategy<Value = PointSet> {
    (1usize..=3).prop_flat_map(move |dim| {
        prop::collection::vec((prop::collection::vec(-1.0f64..1.0, dim), -30i32..30), 2..max_n).prop_filter_map(
            "need two distinct points",
            move |raw| {
                let mut seen = HashSet::new();
                let rows: Vec<Vec<f64>> = raw
                    .into_iter()
                    .map(|(p, e)| p.into_iter().map(|x| x * 2f64.powi(e)).collect::<Vec<f64>>())
                    .filter(|p| seen.insert(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
                    .collect();
                (rows.len() >= 2).then(|| PointSet::from_rows(&rows).unwrap())
            },
        )
    })
}

fn queries(points: &PointSet, picks: &[(usize, f64, i32)]) -> Vec<Vec<f64>> {
    picks
        .iter()
        .map(|&(i, t, e)| points.point(i % points.len()).iter().map(|&x| x + t * 2f64.powi(e)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn structures_satisfy_their_invariants(points in point_set(60), eps in prop::sample::select(vec![0.1, 0.25, 0.49])) {
        let multires = eps * points.len() as f64 >= 1.0;
        let idx = Index::build(points, IndexConfig::new(eps), true, multires).unwrap();
        let v = verify::index(&idx.main);
        prop_assert!(v.is_clean(), "{}", v);
        if let Some(mr) = &idx.multires {
            let v = verify::multires(mr);
            prop_assert!(v.is_clean(), "{}", v);
        }
    }

    #[test]
    fn every_mode_returns_a_valid_answer(
        points in point_set(50),
        eps in prop::sample::select(vec![0.1, 0.25, 0.49]),
        exact_rough in any::<bool>(),
        picks in prop::collection::vec((0usize..1000, -1.0f64..1.0, -35i32..35), 1..12),
    ) {
        let mut cfg = IndexConfig::new(eps);
        if exact_rough {
            cfg.rough = RoughKind::Exact;
        }
        let multires = eps * points.len() as f64 >= 1.0;
        let idx = Index::build(points, cfg, true, multires).unwrap();
        let pts = idx.main.points();
        for q in queries(pts, &picks) {
            let (_, best) = brute_force_nn(pts, &q).unwrap();
            let mut trace = SearchTrace::default();
            let sf = idx.main.query_traced(&q, Some(&mut trace)).unwrap();
            let w = verify::walk(&idx.main, &q, &trace, &sf, best);
            prop_assert!(w.is_clean(), "{}", w);
            let bl = idx.main.baseline(&q).unwrap();
            let bs = bootstrap_query(idx.coarse.as_ref().unwrap(), &idx.main, &q, None).unwrap().answer;
            for a in [sf, bl, bs] {
                prop_assert!(a.dist <= (1.0 + eps) * best);
                prop_assert_eq!(a.dist, pts.dist_to(a.id, &q));
            }
            if let Some(mr) = &idx.multires {
                prop_assert!(mr.query(&q).unwrap().dist <= (1.0 + eps) * best);
            }
        }
    }

    #[test]
    fn container_round_trip(points in point_set(40), seed in any::<u64>()) {
        let mut cfg = IndexConfig::new(0.25);
        cfg.seed = seed;
        let multires = points.len() >= 4;
        let idx = Index::build(points, cfg, true, multires).unwrap();
        let bytes = idx.to_bytes();
        let back = Index::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert!(back == idx);
    }

    #[test]
    fn ancestor_query_matches_walk(points in point_set(80), rs in prop::collection::vec((0usize..1000, 0.0f64..1.5), 1..40)) {
        let idx = Index::build(points, IndexConfig::new(0.25), false, false).unwrap();
        let base = &idx.main.base;
        let top = base.hst.label(base.hst.root());
        for (i, t) in rs {
            let id = i % base.points.len();
            let r = t * top;
            prop_assert_eq!(base.ancestors.query(&base.hst, id, r).0, base.hst.ancestor_naive(id, r));
        }
    }
}
