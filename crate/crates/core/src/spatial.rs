//! Cluster trees over coordinate embeddings and ε-range search.
//!
//! A node's points are split by bisecting its bounding box along every axis
//! at once, giving up to `2^k` children in `k` dimensions. Empty children are
//! dropped. Range queries descend the tree depth first and prune every
//! cluster whose bounding box lies farther than ε from the query.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metric::PointSet;

pub const DEFAULT_LEAF_MAX: usize = 32;

/// Relative slack on the pruning radius. Pruning only needs a lower bound of
/// the metric; the slack absorbs rounding in the chord-vs-arc comparison on
/// the sphere. Candidates are always re-checked with the exact metric.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Node {
    /// Range into [`ClusterTree::permutation`].
    pub start: usize,
    pub end: usize,
    pub level: usize,
    pub parent: Option<usize>,
    /// Children occupy the contiguous id range `first_child..first_child + n_children`.
    pub first_child: usize,
    pub n_children: usize,
}

impl Node {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.n_children == 0
    }

    pub fn children(&self) -> std::ops::Range<usize> {
        self.first_child..self.first_child + self.n_children
    }
}

/// Hierarchy of nested point clusters with axis-aligned bounding boxes.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    nodes: Vec<Node>,
    perm: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    dim: usize,
    leaf_max: usize,
    depth: usize,
}

fn tight_box(ps: &PointSet, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let k = ps.dim();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for &i in idx {
        for (d, &c) in ps.point(i).iter().enumerate() {
            lo[d] = lo[d].min(c);
            hi[d] = hi[d].max(c);
        }
    }
    (lo, hi)
}

impl ClusterTree {
    /// Builds the tree; leaves hold at most `leaf_max` points unless they
    /// consist of coincident points.
    pub fn build(ps: &PointSet, leaf_max: usize) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if !ps.metric().has_embedding() {
            return Err(Error::NoEmbedding);
        }
        if leaf_max == 0 {
            return Err(Error::invalid("leaf_max must be positive"));
        }
        if ps.dim() > 30 {
            return Err(Error::invalid(
                "cluster trees support at most 30 dimensions",
            ));
        }
        let n = ps.len();
        let k = ps.dim();
        let mut tree = ClusterTree {
            nodes: Vec::new(),
            perm: (0..n).collect(),
            lo: Vec::new(),
            hi: Vec::new(),
            dim: k,
            leaf_max,
            depth: 0,
        };
        let (lo, hi) = tight_box(ps, &tree.perm);
        tree.push_node(0, n, 0, None, lo, hi);

        let mut stack = vec![0usize];
        let mut codes: Vec<(u32, usize)> = Vec::new();
        while let Some(id) = stack.pop() {
            let (start, end, level) = {
                let nd = &tree.nodes[id];
                (nd.start, nd.end, nd.level)
            };
            if end - start <= leaf_max {
                continue;
            }
            let (blo, bhi) = (tree.box_lo(id).to_vec(), tree.box_hi(id).to_vec());
            if blo.iter().zip(&bhi).all(|(a, b)| a == b) {
                continue;
            }
            let mid: Vec<f64> = blo
                .iter()
                .zip(&bhi)
                .map(|(a, b)| a + (b - a) / 2.0)
                .collect();
            codes.clear();
            codes.extend(tree.perm[start..end].iter().map(|&i| {
                let p = ps.point(i);
                let code = (0..k).fold(0u32, |c, d| {
                    if bhi[d] > blo[d] && p[d] >= mid[d] {
                        c | (1 << d)
                    } else {
                        c
                    }
                });
                (code, i)
            }));
            codes.sort_by_key(|&(c, _)| c);
            for (slot, &(_, i)) in tree.perm[start..end].iter_mut().zip(codes.iter()) {
                *slot = i;
            }
            let mut groups: Vec<(usize, usize)> = Vec::new();
            let mut s = 0;
            while s < codes.len() {
                let mut e = s + 1;
                while e < codes.len() && codes[e].0 == codes[s].0 {
                    e += 1;
                }
                groups.push((start + s, start + e));
                s = e;
            }
            let child_boxes: Vec<_> = groups
                .iter()
                .map(|&(a, b)| tight_box(ps, &tree.perm[a..b]))
                .collect();
            if groups.len() == 1 && child_boxes[0].0 == blo && child_boxes[0].1 == bhi {
                // bisection made no progress (extent below float resolution)
                continue;
            }
            let first = tree.nodes.len();
            for ((a, b), (clo, chi)) in groups.into_iter().zip(child_boxes) {
                tree.push_node(a, b, level + 1, Some(id), clo, chi);
            }
            let count = tree.nodes.len() - first;
            tree.nodes[id].first_child = first;
            tree.nodes[id].n_children = count;
            tree.depth = tree.depth.max(level + 1);
            for c in (first..first + count).rev() {
                stack.push(c);
            }
        }
        Ok(tree)
    }

    fn push_node(
        &mut self,
        start: usize,
        end: usize,
        level: usize,
        parent: Option<usize>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) {
        self.nodes.push(Node {
            start,
            end,
            level,
            parent,
            first_child: 0,
            n_children: 0,
        });
        self.lo.extend(lo);
        self.hi.extend(hi);
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Depth of the deepest leaf (root has level 0).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_max(&self) -> usize {
        self.leaf_max
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Point order after construction; every node owns a contiguous range.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Original indices of the points in cluster `id`.
    pub fn indices(&self, id: usize) -> &[usize] {
        let nd = &self.nodes[id];
        &self.perm[nd.start..nd.end]
    }

    pub fn box_lo(&self, id: usize) -> &[f64] {
        &self.lo[id * self.dim..(id + 1) * self.dim]
    }

    pub fn box_hi(&self, id: usize) -> &[f64] {
        &self.hi[id * self.dim..(id + 1) * self.dim]
    }

    /// Euclidean distance from `x` to the bounding box of `id`; a lower bound
    /// of the metric distance to every point in the cluster.
    #[inline]
    pub fn box_distance(&self, id: usize, x: &[f64]) -> f64 {
        let lo = self.box_lo(id);
        let hi = self.box_hi(id);
        let mut s = 0.0;
        for d in 0..self.dim {
            let g = if x[d] < lo[d] {
                lo[d] - x[d]
            } else if x[d] > hi[d] {
                x[d] - hi[d]
            } else {
                0.0
            };
            s += g * g;
        }
        s.sqrt()
    }

    /// Euclidean length of the bounding-box diagonal.
    pub fn box_diagonal(&self, id: usize) -> f64 {
        self.box_lo(id)
            .iter()
            .zip(self.box_hi(id))
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Clusters forming the partition at `level`: all nodes on that level plus
    /// leaves that end above it, in node-id order.
    pub fn level_cells(&self, level: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, nd)| nd.level == level || (nd.is_leaf() && nd.level < level))
            .map(|(id, _)| id)
            .collect()
    }

    /// Calls `visit(i, d)` for every point `i` with `d = d(x, x_i) <= eps`.
    pub fn for_each_in_ball<F>(&self, ps: &PointSet, x: &[f64], eps: f64, mut visit: F)
    where
        F: FnMut(usize, f64),
    {
        debug_assert_eq!(ps.len(), self.len());
        let cut = eps * (1.0 + PRUNE_SLACK);
        if self.box_distance(0, x) > cut {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let nd = &self.nodes[id];
            if nd.is_leaf() {
                for &i in &self.perm[nd.start..nd.end] {
                    let d = ps.dist_to(x, i);
                    if d <= eps {
                        visit(i, d);
                    }
                }
            } else {
                for c in nd.children() {
                    if self.box_distance(c, x) <= cut {
                        stack.push(c);
                    }
                }
            }
        }
    }

    /// Nearest point to `x` and its distance; ties go to the lowest index.
    pub fn nearest(&self, ps: &PointSet, x: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if self.box_distance(id, x) > best.1 * (1.0 + PRUNE_SLACK) {
                continue;
            }
            let nd = &self.nodes[id];
            if nd.is_leaf() {
                for &i in &self.perm[nd.start..nd.end] {
                    let d = ps.dist_to(x, i);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        best = (i, d);
                    }
                }
            } else {
                let mut kids: Vec<(f64, usize)> = nd
                    .children()
                    .map(|c| (self.box_distance(c, x), c))
                    .collect();
                kids.sort_by(|a, b| b.0.total_cmp(&a.0));
                stack.extend(kids.into_iter().map(|(_, c)| c));
            }
        }
        best
    }

    /// CSV dump of every bounding box: `level, min_0.., max_0..`.
    pub fn boxes_csv(&self) -> String {
        let mut out = String::from("level");
        for d in 0..self.dim {
            let _ = write!(out, ",min_{d}");
        }
        for d in 0..self.dim {
            let _ = write!(out, ",max_{d}");
        }
        out.push('\n');
        for (id, nd) in self.nodes.iter().enumerate() {
            let _ = write!(out, "{}", nd.level);
            for v in self.box_lo(id).iter().chain(self.box_hi(id)) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

/// Indices `i` with `d(x, x_i) <= eps`, in ascending order. The query itself
/// is included when it belongs to the set.
pub fn eps_neighbors(tree: &ClusterTree, ps: &PointSet, x: &[f64], eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    tree.for_each_in_ball(ps, x, eps, |i, _| out.push(i));
    out.sort_unstable();
    out
}

/// Reference scan over all points.
pub fn eps_neighbors_brute(ps: &PointSet, x: &[f64], eps: f64) -> Vec<usize> {
    (0..ps.len()).filter(|&i| ps.dist_to(x, i) <= eps).collect()
}
