//! On-disk index container.
//!
//! Layout: magic `SFAN`, `u32` version, a fixed header, then tagged
//! sections `(u32 tag, u64 byte length, payload)` in a fixed order.
//! Integers are little-endian; reals are IEEE-754 binary64.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::greedy::GreedyOrder;
use crate::hst::{AncestorIndex, Hst, Piece};
use crate::metric::PointSet;
use crate::multires::{Cluster, ClusterGraph, MultiResIndex};
use crate::nav_graph::NavGraph;
use crate::reverse_tree::ReverseTree;
use crate::rough::{QtNode, Quadtree, RoughAnn, RoughKind};
use crate::spreadfree::{BaseIndex, IndexConfig, SpreadFreeIndex, COARSE_EPS};

pub const MAGIC: &[u8; 4] = b"SFAN";
pub const VERSION: u32 = 1;

pub const FLAG_MULTIRES: u32 = 1;
pub const FLAG_COARSE: u32 = 2;

const TAG_POINTS: u32 = 1;
const TAG_GREEDY: u32 = 2;
const TAG_GRAPH: u32 = 3;
const TAG_HST: u32 = 4;
const TAG_ANCESTORS: u32 = 5;
const TAG_REVERSE: u32 = 6;
const TAG_ROUGH: u32 = 7;
const TAG_COARSE: u32 = 8;
const TAG_MULTIRES: u32 = 9;

/// Everything the command line needs: the main index, the `eps = 1/2`
/// sibling for bootstrapped queries, and the optional multi-resolution index.
#[derive(Clone, Debug, PartialEq)]
pub struct Index {
    pub main: SpreadFreeIndex,
    pub coarse: Option<SpreadFreeIndex>,
    pub multires: Option<MultiResIndex>,
}

impl Index {
    pub fn build(points: PointSet, cfg: IndexConfig, coarse: bool, multires: bool) -> Result<Index> {
        let main = SpreadFreeIndex::build(points, cfg)?;
        let multires = if multires {
            Some(MultiResIndex::build(Arc::clone(&main.base), cfg.eps, cfg.c_const)?)
        } else {
            None
        };
        let coarse = if coarse { Some(main.sibling(COARSE_EPS)?) } else { None };
        Ok(Index { main, coarse, multires })
    }

    pub fn flags(&self) -> u32 {
        let mut f = 0;
        if self.multires.is_some() {
            f |= FLAG_MULTIRES;
        }
        if self.coarse.is_some() {
            f |= FLAG_COARSE;
        }
        f
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.main;
        let cfg = &m.config;
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u64(m.len() as u64);
        w.u32(m.points().dim() as u32);
        w.f64(cfg.eps);
        w.f64(cfg.c_const);
        w.u32(self.flags());
        w.u64(cfg.seed);
        w.u64(cfg.start_id as u64);
        w.u8(cfg.rough.into());
        w.f64(cfg.bootstrap_factor);

        let base = &*m.base;
        w.section(TAG_POINTS, |s| s.f64s(base.points.coords()));
        w.section(TAG_GREEDY, |s| {
            s.u32s(&m.greedy.order);
            s.f64s(&m.greedy.radii);
            put_friends(s, &m.greedy);
        });
        w.section(TAG_GRAPH, |s| put_graph(s, &m.graph));
        w.section(TAG_HST, |s| {
            let h = &base.hst;
            s.u32s(&h.parent);
            s.u32s(&h.children.iter().flatten().copied().collect::<Vec<_>>());
            s.f64s(&h.label);
            s.u32s(&h.rep);
            s.u32s(&h.sigma_min);
            s.u32s(&h.tin);
            s.u32s(&h.tout);
        });
        w.section(TAG_ANCESTORS, |s| {
            let a = &base.ancestors;
            s.u32(a.root);
            s.u64(a.pieces.len() as u64);
            for p in &a.pieces {
                match *p {
                    Piece::Split { node, below, above } => {
                        s.u8(0);
                        s.u32(node);
                        s.u32(below);
                        s.u32(above);
                    }
                    Piece::Single { node } => {
                        s.u8(1);
                        s.u32(node);
                    }
                }
            }
        });
        w.section(TAG_REVERSE, |s| s.u32s(&base.reverse.parent));
        w.section(TAG_ROUGH, |s| {
            s.u8(base.rough.kind().into());
            if let RoughAnn::Quadtree(qt) = &base.rough {
                s.u64(qt.seed);
                s.f64s(&qt.origin);
                s.f64s(&qt.shift);
                s.u64(qt.k as u64);
                s.u64(qt.frac_bits);
                s.u32s(&qt.order);
                s.u64(qt.nodes.len() as u64);
                for v in &qt.nodes {
                    s.u32(v.level);
                    s.u32(v.lo);
                    s.u32(v.hi);
                    s.u32(v.rep);
                    s.u32(v.parent);
                }
            }
        });
        if let Some(c) = &self.coarse {
            w.section(TAG_COARSE, |s| {
                s.f64(c.config.eps);
                put_friends(s, &c.greedy);
                put_graph(s, &c.graph);
            });
        }
        if let Some(mr) = &self.multires {
            w.section(TAG_MULTIRES, |s| {
                s.f64(mr.eps);
                s.f64(mr.c_const);
                s.u32(mr.m as u32);
                s.u64(mr.slices.len() as u64);
                for (&i, members) in &mr.slices {
                    s.u32(i as u32);
                    s.u32s(&members.iter().flat_map(|&(p, c)| [p, c]).collect::<Vec<_>>());
                }
                s.u64(mr.clusters.len() as u64);
                for c in &mr.clusters {
                    s.u32(c.resolution as u32);
                    s.u32(c.head);
                    s.u32(c.graph);
                }
                s.u64(mr.graphs.len() as u64);
                for g in &mr.graphs {
                    s.u32s(&g.ids);
                    s.u32s(&g.greedy.order);
                    s.f64s(&g.greedy.radii);
                    s.f64(g.greedy.eps);
                    put_friends(s, &g.greedy);
                    put_graph(s, &g.graph);
                }
            });
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Index> {
        let mut r = Reader { buf: bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an index file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported index version {version}, expected {VERSION}")));
        }
        let n = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let eps = r.f64()?;
        let c_const = r.f64()?;
        let flags = r.u32()?;
        let seed = r.u64()?;
        let start_id = r.u64()? as usize;
        let rough_kind = RoughKind::try_from(r.u8()?)?;
        let bootstrap_factor = r.f64()?;
        let cfg = IndexConfig { eps, c_const, start_id, seed, rough: rough_kind, bootstrap_factor };

        let mut s = r.section(TAG_POINTS)?;
        let points = PointSet::new(dim, s.f64s()?)?;
        if points.len() != n {
            return Err(Error::Format(format!("header says {n} points, section holds {}", points.len())));
        }
        s.done()?;

        let mut s = r.section(TAG_GREEDY)?;
        let order = s.u32s()?;
        let radii = s.f64s()?;
        let (fo, fr) = get_friends(&mut s)?;
        s.done()?;
        let greedy = GreedyOrder::from_parts(order, radii, fo, fr, c_const, eps);

        let mut s = r.section(TAG_GRAPH)?;
        let graph = get_graph(&mut s)?;
        s.done()?;

        let mut s = r.section(TAG_HST)?;
        let parent = s.u32s()?;
        let flat = s.u32s()?;
        let children = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let hst = Hst::from_parts(parent, children, s.f64s()?, s.u32s()?, s.u32s()?, s.u32s()?, s.u32s()?);
        s.done()?;

        let mut s = r.section(TAG_ANCESTORS)?;
        let root = s.u32()?;
        let count = s.u64()? as usize;
        let mut pieces = Vec::with_capacity(count.min(bytes.len()));
        for _ in 0..count {
            pieces.push(match s.u8()? {
                0 => Piece::Split { node: s.u32()?, below: s.u32()?, above: s.u32()? },
                1 => Piece::Single { node: s.u32()? },
                t => return Err(Error::Format(format!("bad ancestor piece tag {t}"))),
            });
        }
        s.done()?;
        let ancestors = AncestorIndex { pieces, root };

        let mut s = r.section(TAG_REVERSE)?;
        let reverse = ReverseTree::from_parts(s.u32s()?);
        s.done()?;

        let mut s = r.section(TAG_ROUGH)?;
        let rough = match RoughKind::try_from(s.u8()?)? {
            RoughKind::Exact => RoughAnn::Exact,
            RoughKind::Quadtree => {
                let qseed = s.u64()?;
                let origin = s.f64s()?;
                let shift = s.f64s()?;
                let k = s.u64()? as i64;
                let frac_bits = s.u64()?;
                let order = s.u32s()?;
                let count = s.u64()? as usize;
                let mut nodes = Vec::with_capacity(count.min(bytes.len()));
                for _ in 0..count {
                    nodes.push(QtNode {
                        level: s.u32()?,
                        lo: s.u32()?,
                        hi: s.u32()?,
                        rep: s.u32()?,
                        parent: s.u32()?,
                    });
                }
                RoughAnn::Quadtree(Quadtree::from_parts(&points, qseed, origin, shift, k, frac_bits, order, nodes))
            }
        };
        s.done()?;

        let base = Arc::new(BaseIndex { points, hst, ancestors, reverse, rough });
        let coarse = if flags & FLAG_COARSE != 0 {
            let mut s = r.section(TAG_COARSE)?;
            let ceps = s.f64()?;
            let (fo, fr) = get_friends(&mut s)?;
            let g = GreedyOrder::from_parts(greedy.order.clone(), greedy.radii.clone(), fo, fr, c_const, ceps);
            let graph = get_graph(&mut s)?;
            s.done()?;
            Some(SpreadFreeIndex::from_parts(Arc::clone(&base), g, graph, IndexConfig { eps: ceps, ..cfg }))
        } else {
            None
        };
        let multires = if flags & FLAG_MULTIRES != 0 {
            let mut s = r.section(TAG_MULTIRES)?;
            let meps = s.f64()?;
            let mc = s.f64()?;
            let m = s.u32()? as i32;
            let mut slices = BTreeMap::new();
            for _ in 0..s.u64()? {
                let i = s.u32()? as i32;
                let flat = s.u32s()?;
                slices.insert(i, flat.chunks_exact(2).map(|c| (c[0], c[1])).collect());
            }
            let count = s.u64()? as usize;
            let mut clusters = Vec::with_capacity(count.min(bytes.len()));
            for _ in 0..count {
                clusters.push(Cluster { resolution: s.u32()? as i32, head: s.u32()?, graph: s.u32()? });
            }
            let count = s.u64()? as usize;
            let mut graphs = Vec::with_capacity(count.min(bytes.len()));
            for _ in 0..count {
                let ids = s.u32s()?;
                let order = s.u32s()?;
                let radii = s.f64s()?;
                let geps = s.f64()?;
                let (fo, fr) = get_friends(&mut s)?;
                let g = GreedyOrder::from_parts(order, radii, fo, fr, mc, geps);
                let graph = get_graph(&mut s)?;
                graphs.push(ClusterGraph::from_parts(&base.points, ids, g, graph));
            }
            s.done()?;
            Some(MultiResIndex { base: Arc::clone(&base), eps: meps, c_const: mc, m, slices, clusters, graphs })
        } else {
            None
        };
        if r.at != bytes.len() {
            return Err(Error::Format("trailing bytes after the last section".into()));
        }
        let main = SpreadFreeIndex::from_parts(base, greedy, graph, cfg);
        Ok(Index { main, coarse, multires })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Index> {
        Index::from_bytes(&fs::read(path)?)
    }
}

fn put_friends(s: &mut Writer, g: &GreedyOrder) {
    s.u64s(&g.friend_offsets.iter().map(|&x| x as u64).collect::<Vec<_>>());
    s.u32s(&g.friend_ranks);
}

fn get_friends(s: &mut Reader) -> Result<(Vec<usize>, Vec<u32>)> {
    let offsets = s.u64s()?.into_iter().map(|x| x as usize).collect::<Vec<_>>();
    let ranks = s.u32s()?;
    check_offsets(&offsets, ranks.len())?;
    Ok((offsets, ranks))
}

fn put_graph(s: &mut Writer, g: &NavGraph) {
    s.u64s(&g.offsets.iter().map(|&x| x as u64).collect::<Vec<_>>());
    s.u32s(&g.targets);
    s.f64s(&g.labels);
}

fn get_graph(s: &mut Reader) -> Result<NavGraph> {
    let offsets = s.u64s()?.into_iter().map(|x| x as usize).collect::<Vec<_>>();
    let targets = s.u32s()?;
    let labels = s.f64s()?;
    check_offsets(&offsets, targets.len())?;
    if labels.len() != targets.len() {
        return Err(Error::Format("edge label count differs from edge count".into()));
    }
    Ok(NavGraph::from_parts(offsets, targets, labels))
}

fn check_offsets(offsets: &[usize], total: usize) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&total)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::Format("corrupt offset table".into()))
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.bytes(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.bytes(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.bytes(&x.to_le_bytes());
    }
    fn u32s(&mut self, xs: &[u32]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u32(x));
    }
    fn u64s(&mut self, xs: &[u64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u64(x));
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }
    fn section(&mut self, tag: u32, body: impl FnOnce(&mut Writer)) {
        let mut inner = Writer::default();
        body(&mut inner);
        self.u32(tag);
        self.u64(inner.buf.len() as u64);
        self.bytes(&inner.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(len).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format("index file is truncated".into()));
        };
        let out = &self.buf[self.at..end];
        self.at = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, width: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(width).is_none_or(|b| b > self.buf.len() - self.at) {
            return Err(Error::Format("array length runs past the end of its section".into()));
        }
        Ok(n)
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn section(&mut self, tag: u32) -> Result<Reader<'a>> {
        let got = self.u32()?;
        if got != tag {
            return Err(Error::Format(format!("expected section {tag}, found {got}")));
        }
        let len = self.u64()? as usize;
        Ok(Reader { buf: self.take(len)?, at: 0 })
    }
    fn done(&self) -> Result<()> {
        if self.at == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Format("section has trailing bytes".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_dataset, gen_queries, DatasetKind};

    fn sample(multires: bool, rough: RoughKind) -> Index {
        let p = gen_dataset(DatasetKind::Clusters, 120, 3, 4).unwrap();
        let cfg = IndexConfig { seed: 9, rough, ..IndexConfig::new(0.25) };
        Index::build(p, cfg, true, multires).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        for (mr, rough) in [(true, RoughKind::Quadtree), (false, RoughKind::Exact), (false, RoughKind::Quadtree)] {
            let idx = sample(mr, rough);
            let bytes = idx.to_bytes();
            let back = Index::from_bytes(&bytes).unwrap();
            assert_eq!(back, idx);
            assert_eq!(back.to_bytes(), bytes);
            for q in gen_queries(idx.main.points(), 30, 1) {
                assert_eq!(back.main.query(&q).unwrap(), idx.main.query(&q).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        let bytes = sample(false, RoughKind::Quadtree).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Index::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(Index::from_bytes(&bad), Err(Error::Format(_))));
        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(Index::from_bytes(&bytes[..cut]).is_err());
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(Index::from_bytes(&long).is_err());
    }
}
