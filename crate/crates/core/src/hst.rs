//! Hierarchically well-separated tree built by splitting the Euclidean MST,
//! plus an edge-separator tree answering weighted ancestor queries.
//!
//! Node ids: leaves are `0..n` (leaf `i` holds point `i`), internal nodes
//! follow in merge order, and the root is the last node. A node's label is
//! the total MST weight inside its subtree (raised, at rounding level, to the
//! largest computed distance across its split), so labels strictly increase
//! towards the root, and `d_HT(x, y) = label(lca(x, y))` overestimates
//! `d(x, y)` by at most a factor `n - 1`.

use crate::metric::PointSet;

pub const NONE: u32 = u32::MAX;

/// `a + b` rounded towards `+inf`, so summed labels never fall below the
/// exact MST weight and the tree stays expansive under rounding.
fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    // Two-sum: `err` is the exact rounding error `(a + b) - s`.
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hst {
    pub(crate) parent: Vec<u32>,
    pub(crate) children: Vec<[u32; 2]>,
    pub(crate) label: Vec<f64>,
    pub(crate) rep: Vec<u32>,
    pub(crate) sigma_min: Vec<u32>,
    /// Preorder number of each node.
    pub(crate) tin: Vec<u32>,
    /// Largest preorder number inside each subtree.
    pub(crate) tout: Vec<u32>,
    /// Distortion bound consumed by the search formulas: `3 n^2`.
    pub xi_factor: f64,
}

/// Exact MST by Prim's algorithm; edges in insertion order as `(tree endpoint, new point, weight)`.
pub(crate) fn prim_mst(points: &PointSet) -> Vec<(u32, u32, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0u32; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    in_tree[0] = true;
    for p in 1..n {
        best[p] = points.dist(0, p);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut w = f64::INFINITY;
        for p in 0..n {
            if !in_tree[p] && best[p] < w {
                w = best[p];
                next = p;
            }
        }
        in_tree[next] = true;
        edges.push((link[next], next as u32, w));
        for p in 0..n {
            if !in_tree[p] {
                let d = points.dist(next, p);
                if d < best[p] {
                    best[p] = d;
                    link[p] = next as u32;
                }
            }
        }
    }
    edges
}

fn find(uf: &mut [u32], mut x: u32) -> u32 {
    while uf[x as usize] != x {
        let up = uf[uf[x as usize] as usize];
        uf[x as usize] = up;
        x = up;
    }
    x
}

impl Hst {
    /// Builds the tree for `points`; `rank_of` supplies greedy ranks for `sigma_min`.
    pub fn build(points: &PointSet, rank_of: &[u32]) -> Hst {
        let n = points.len();
        let total = 2 * n - 1;
        let mut parent = vec![NONE; total];
        let mut children = vec![[NONE, NONE]; total];
        let mut label = vec![0.0; total];
        let mut rep: Vec<u32> = (0..total as u32).collect();

        // Splitting top-down at the heaviest edge (lowest index on ties) is
        // the same as merging bottom-up by (weight asc, index desc).
        let edges = prim_mst(points);
        let mut by_weight: Vec<usize> = (0..edges.len()).collect();
        by_weight.sort_by(|&a, &b| edges[a].2.total_cmp(&edges[b].2).then(b.cmp(&a)));

        let mut uf: Vec<u32> = (0..n as u32).collect();
        let mut top: Vec<u32> = (0..n as u32).collect();
        let mut members: Vec<Vec<u32>> = (0..n as u32).map(|i| vec![i]).collect();
        for (k, &e) in by_weight.iter().enumerate() {
            let (a, b, w) = edges[e];
            let mut ra = find(&mut uf, a);
            let mut rb = find(&mut uf, b);
            let (ta, tb) = (top[ra as usize], top[rb as usize]);
            let v = (n + k) as u32;
            children[v as usize] = [ta, tb];
            parent[ta as usize] = v;
            parent[tb as usize] = v;
            // Every pair whose lca is v is scanned here once, so the label
            // dominates their computed distances even where rounding breaks
            // the triangle inequality. In exact arithmetic the sum dominates.
            let cross = members[ra as usize]
                .iter()
                .flat_map(|&x| members[rb as usize].iter().map(move |&y| (x, y)))
                .map(|(x, y)| points.dist(x as usize, y as usize))
                .fold(0.0, f64::max);
            label[v as usize] = add_up(add_up(label[ta as usize], label[tb as usize]), w).max(cross);
            rep[v as usize] = rep[ta as usize];
            if members[ra as usize].len() < members[rb as usize].len() {
                std::mem::swap(&mut ra, &mut rb);
            }
            let moved = std::mem::take(&mut members[rb as usize]);
            members[ra as usize].extend(moved);
            uf[rb as usize] = ra;
            top[ra as usize] = v;
        }

        let mut hst = Hst {
            parent,
            children,
            label,
            rep,
            sigma_min: vec![0; total],
            tin: vec![0; total],
            tout: vec![0; total],
            xi_factor: 3.0 * (n as f64) * (n as f64),
        };
        hst.number_nodes();
        hst.assign_sigma_min(rank_of);
        hst
    }

    fn number_nodes(&mut self) {
        let mut clock = 0u32;
        let mut stack = vec![(self.root(), false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                self.tout[v as usize] = clock - 1;
                continue;
            }
            self.tin[v as usize] = clock;
            clock += 1;
            stack.push((v, true));
            let [a, b] = self.children[v as usize];
            if a != NONE {
                stack.push((b, false));
                stack.push((a, false));
            }
        }
    }

    fn assign_sigma_min(&mut self, rank_of: &[u32]) {
        let n = self.leaf_count();
        // Children always have smaller ids than their parent.
        for v in 0..self.node_count() {
            self.sigma_min[v] = if v < n {
                rank_of[v]
            } else {
                let [a, b] = self.children[v];
                self.sigma_min[a as usize].min(self.sigma_min[b as usize])
            };
        }
    }

    pub(crate) fn from_parts(
        parent: Vec<u32>,
        children: Vec<[u32; 2]>,
        label: Vec<f64>,
        rep: Vec<u32>,
        sigma_min: Vec<u32>,
        tin: Vec<u32>,
        tout: Vec<u32>,
    ) -> Hst {
        let n = parent.len().div_ceil(2);
        Hst {
            parent,
            children,
            label,
            rep,
            sigma_min,
            tin,
            tout,
            xi_factor: 3.0 * (n as f64) * (n as f64),
        }
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.parent.len().div_ceil(2)
    }

    pub fn root(&self) -> u32 {
        (self.parent.len() - 1) as u32
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        (v as usize) < self.leaf_count()
    }

    /// The leaf storing point `id`.
    pub fn leaf(&self, id: usize) -> u32 {
        id as u32
    }

    pub fn label(&self, v: u32) -> f64 {
        self.label[v as usize]
    }

    /// Parent label, or `+inf` for the root.
    pub fn parent_label(&self, v: u32) -> f64 {
        match self.parent[v as usize] {
            NONE => f64::INFINITY,
            p => self.label[p as usize],
        }
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        match self.parent[v as usize] {
            NONE => None,
            p => Some(p),
        }
    }

    pub fn children(&self, v: u32) -> Option<[u32; 2]> {
        match self.children[v as usize] {
            [NONE, _] => None,
            c => Some(c),
        }
    }

    pub fn rep(&self, v: u32) -> u32 {
        self.rep[v as usize]
    }

    /// Smallest greedy rank among the points below `v`.
    pub fn sigma_min(&self, v: u32) -> u32 {
        self.sigma_min[v as usize]
    }

    /// True if `a` is `b` or an ancestor of `b`.
    #[inline]
    pub fn is_ancestor(&self, a: u32, b: u32) -> bool {
        let (a, b) = (a as usize, b as usize);
        self.tin[a] <= self.tin[b] && self.tin[b] <= self.tout[a]
    }

    /// Leaf ids (= point ids) below `v`.
    pub fn points_below(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                None => out.push(x),
                Some([a, b]) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }

    pub fn lca(&self, mut a: u32, b: u32) -> u32 {
        while !self.is_ancestor(a, b) {
            a = self.parent[a as usize];
        }
        a
    }

    /// HST distance between two points.
    pub fn tree_dist(&self, a: usize, b: usize) -> f64 {
        self.label(self.lca(a as u32, b as u32))
    }

    /// Ancestor query by walking up from the leaf; O(depth). Reference implementation.
    pub fn ancestor_naive(&self, id: usize, r: f64) -> u32 {
        let mut v = self.leaf(id);
        while let Some(p) = self.parent(v) {
            if self.label(p) > r {
                break;
            }
            v = p;
        }
        v
    }
}

/// Result of the exhaustive separation check: worst ratio of
/// `d(P_z, P \ P_z)` to `label(parent(z)) / xi` over all non-root nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub worst_ratio: f64,
    pub violations: usize,
}

/// Exhaustively checks `d(P_z, P \ P_z) >= label(parent(z)) / xi` for every node.
pub fn gap_check(hst: &Hst, points: &PointSet) -> GapReport {
    let n = points.len();
    let mut gap = vec![f64::INFINITY; hst.node_count()];
    for a in 0..n {
        for b in a + 1..n {
            let d = points.dist(a, b);
            let top = hst.lca(a as u32, b as u32);
            for start in [a as u32, b as u32] {
                let mut v = start;
                while v != top {
                    if d < gap[v as usize] {
                        gap[v as usize] = d;
                    }
                    v = hst.parent[v as usize];
                }
            }
        }
    }
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for v in 0..hst.node_count() as u32 {
        let Some(p) = hst.parent(v) else { continue };
        let need = hst.label(p) / hst.xi_factor;
        let ratio = gap[v as usize] / need;
        worst = worst.min(ratio);
        if ratio < 1.0 {
            violations += 1;
        }
    }
    GapReport { worst_ratio: worst, violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Piece {
    /// Edge `node -> parent(node)`; `below` covers the subtree of `node`, `above` the rest.
    Split { node: u32, below: u32, above: u32 },
    /// A single HST node.
    Single { node: u32 },
}

/// Balanced edge-separator tree over an [`Hst`] answering `anc(p, r)`:
/// the node `u` on the leaf-to-root path of `p` with
/// `label(u) <= r < label(parent(u))`. The root's parent label is `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct AncestorIndex {
    pub(crate) pieces: Vec<Piece>,
    pub(crate) root: u32,
}

impl AncestorIndex {
    pub fn build(hst: &Hst) -> AncestorIndex {
        let mut nodes: Vec<u32> = (0..hst.node_count() as u32).collect();
        nodes.sort_by_key(|&v| hst.tin[v as usize]);
        let mut index = AncestorIndex { pieces: Vec::new(), root: 0 };
        let mut mark = vec![u32::MAX; hst.node_count()];
        let mut size = vec![0u32; hst.node_count()];
        let mut stamp = 0u32;
        index.root = index.split(hst, nodes, &mut mark, &mut size, &mut stamp);
        index
    }

    /// `piece` is a connected set of HST nodes in preorder.
    fn split(
        &mut self,
        hst: &Hst,
        piece: Vec<u32>,
        mark: &mut [u32],
        size: &mut [u32],
        stamp: &mut u32,
    ) -> u32 {
        if piece.len() == 1 {
            self.pieces.push(Piece::Single { node: piece[0] });
            return (self.pieces.len() - 1) as u32;
        }
        *stamp += 1;
        for &v in &piece {
            mark[v as usize] = *stamp;
        }
        for &v in piece.iter().rev() {
            let mut s = 1;
            if let Some(cs) = hst.children(v) {
                for c in cs {
                    if mark[c as usize] == *stamp {
                        s += size[c as usize];
                    }
                }
            }
            size[v as usize] = s;
        }
        let total = piece.len() as u32;
        // piece[0] is the top and has no parent edge inside the piece.
        let cut = piece[1..]
            .iter()
            .copied()
            .min_by_key(|&v| size[v as usize].max(total - size[v as usize]))
            .unwrap();
        let (below, above): (Vec<u32>, Vec<u32>) =
            piece.into_iter().partition(|&v| hst.is_ancestor(cut, v));
        let slot = self.pieces.len();
        self.pieces.push(Piece::Single { node: cut });
        let b = self.split(hst, below, mark, size, stamp);
        let a = self.split(hst, above, mark, size, stamp);
        self.pieces[slot] = Piece::Split { node: cut, below: b, above: a };
        slot as u32
    }

    /// `anc(id, r)` and the number of separator-tree steps taken.
    pub fn query(&self, hst: &Hst, id: usize, r: f64) -> (u32, u64) {
        debug_assert!(r >= 0.0);
        let mut anchor = hst.leaf(id);
        let mut at = self.root;
        let mut steps = 0;
        loop {
            steps += 1;
            match self.pieces[at as usize] {
                Piece::Single { node } => return (node, steps),
                Piece::Split { node, below, above } => {
                    if hst.is_ancestor(node, anchor) {
                        let lo = hst.label(node);
                        let hi = hst.parent_label(node);
                        if lo <= r && r < hi {
                            return (node, steps);
                        }
                        if lo > r {
                            at = below;
                        } else {
                            anchor = hst.parent[node as usize];
                            at = above;
                        }
                    } else {
                        at = above;
                    }
                }
            }
        }
    }

    /// Depth of the separator tree (longest root-to-leaf piece chain).
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 1usize)];
        while let Some((at, d)) = stack.pop() {
            best = best.max(d);
            if let Piece::Split { below, above, .. } = self.pieces[at as usize] {
                stack.push((below, d + 1));
                stack.push((above, d + 1));
            }
        }
        best
    }

    /// Sizes `(piece, below, above)` for every split, for balance checks.
    pub fn split_sizes(&self) -> Vec<(usize, usize, usize)> {
        let mut sizes = vec![0usize; self.pieces.len()];
        let mut out = Vec::new();
        fn count(idx: &AncestorIndex, at: u32, sizes: &mut [usize]) -> usize {
            let s = match idx.pieces[at as usize] {
                Piece::Single { .. } => 1,
                Piece::Split { below, above, .. } => count(idx, below, sizes) + count(idx, above, sizes),
            };
            sizes[at as usize] = s;
            s
        }
        count(self, self.root, &mut sizes);
        for (i, p) in self.pieces.iter().enumerate() {
            if let Piece::Split { below, above, .. } = *p {
                out.push((sizes[i], sizes[below as usize], sizes[above as usize]));
            }
        }
        out
    }
}
