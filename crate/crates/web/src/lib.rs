//! Browser demo: a planar point set with click-to-query routing and a
//! greedy-prefix explorer. See `www/index.html`.

use sfann::dataset::{gen_dataset, DatasetKind};
use sfann::{baseline_search, IndexConfig, SearchTrace, SpreadFreeIndex};
use wasm_bindgen::prelude::*;

/// Largest point set the page may request; construction is quadratic.
pub const MAX_DEMO_POINTS: usize = 3000;

#[wasm_bindgen]
pub struct Demo {
    index: SpreadFreeIndex,
}

/// Route of one search: visited point ids in order, plus work counters.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    path: Vec<u32>,
    answer: u32,
    distance: f64,
    edges_scanned: u32,
    hops: u32,
}

#[wasm_bindgen]
impl Route {
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<u32> {
        self.path.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn answer(&self) -> u32 {
        self.answer
    }

    #[wasm_bindgen(getter)]
    pub fn distance(&self) -> f64 {
        self.distance
    }

    #[wasm_bindgen(getter)]
    pub fn edges_scanned(&self) -> u32 {
        self.edges_scanned
    }

    #[wasm_bindgen(getter)]
    pub fn hops(&self) -> u32 {
        self.hops
    }
}

impl Demo {
    pub fn build(kind: &str, n: usize, seed: u64, eps: f64) -> Result<Demo, String> {
        if !(2..=MAX_DEMO_POINTS).contains(&n) {
            return Err(format!("n must lie in 2..={MAX_DEMO_POINTS}"));
        }
        let kind: DatasetKind = kind.parse().map_err(|e: sfann::Error| e.to_string())?;
        let mut points = gen_dataset(kind, n, 2, seed).map_err(|e| e.to_string())?;
        if kind == DatasetKind::Geochain {
            // Bend the chain onto a log spiral so the page can draw it.
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let r = points.point(i)[0] + 1.0;
                    let a = i as f64 * 0.7;
                    vec![r.ln() * a.cos(), r.ln() * a.sin()]
                })
                .collect();
            points = sfann::PointSet::from_rows(&rows).map_err(|e| e.to_string())?;
        }
        let index = SpreadFreeIndex::build(points, IndexConfig::new(eps)).map_err(|e| e.to_string())?;
        Ok(Demo { index })
    }

    fn route(&self, trace: &SearchTrace, answer: usize, distance: f64, edges: u64, hops: u64) -> Route {
        let g = &self.index.greedy;
        let mut path: Vec<u32> = trace.visited.iter().map(|&(r, _)| g.order[r as usize]).collect();
        if path.last() != Some(&(answer as u32)) {
            path.push(answer as u32);
        }
        Route { path, answer: answer as u32, distance, edges_scanned: edges as u32, hops: hops as u32 }
    }

    pub fn try_baseline(&self, x: f64, y: f64) -> Result<Route, String> {
        let idx = &self.index;
        let q = [x, y];
        let mut trace = SearchTrace::default();
        let (id, stats) = baseline_search(&idx.graph, idx.points(), &idx.greedy, &q, idx.eps(), Some(&mut trace));
        Ok(self.route(&trace, id, idx.points().dist_to(id, &q), stats.edges_scanned, stats.hops))
    }

    pub fn try_spreadfree(&self, x: f64, y: f64) -> Result<Route, String> {
        let mut trace = SearchTrace::default();
        let a = self.index.query_traced(&[x, y], Some(&mut trace)).map_err(|e| e.to_string())?;
        Ok(self.route(&trace, a.id, a.dist, a.stats.edges_scanned, a.stats.hops))
    }
}

#[wasm_bindgen]
impl Demo {
    /// Builds a planar dataset (`uniform`, `clusters` or `geochain`) and its index.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, seed: u64, eps: f64) -> Result<Demo, JsError> {
        Demo::build(kind, n, seed, eps).map_err(|e| JsError::new(&e))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.index.graph.edge_count()
    }

    /// Interleaved `x, y` coordinates by point id.
    pub fn coords(&self) -> Vec<f64> {
        self.index.points().coords().to_vec()
    }

    /// Point ids in greedy-permutation order.
    pub fn greedy_order(&self) -> Vec<u32> {
        self.index.greedy.order.clone()
    }

    /// Covering radius of the first `k` greedy points: every point lies within it
    /// of the prefix. Zero once the prefix is the whole set.
    pub fn prefix_radius(&self, k: usize) -> f64 {
        let g = &self.index.greedy;
        if k == 0 || k >= g.len() {
            return if k == 0 { f64::INFINITY } else { 0.0 };
        }
        g.radii[k]
    }

    /// Greedy routing from the first greedy point.
    pub fn baseline(&self, x: f64, y: f64) -> Result<Route, JsError> {
        self.try_baseline(x, y).map_err(|e| JsError::new(&e))
    }

    /// Two-stage search that starts near the query's scale.
    pub fn spreadfree(&self, x: f64, y: f64) -> Result<Route, JsError> {
        self.try_spreadfree(x, y).map_err(|e| JsError::new(&e))
    }
}
