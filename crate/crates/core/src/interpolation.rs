//! Piecewise-constant interpolation on partitions of the site set.

use std::fmt::Write as _;

use rand::Rng;

use crate::covering::Covering;
use crate::datagen::rng_for;
use crate::error::{Error, Result};
use crate::metric::{LabeledDataset, Metric, PointSet};
use crate::par;
use crate::spatial::ClusterTree;

/// Disjoint cells covering all sites, each with one anchor site.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Cell id of every site, in `0..M`.
    pub cell_of: Vec<usize>,
    /// Anchor site of every cell.
    pub anchors: Vec<usize>,
    /// Upper bound on the largest cell diameter.
    pub mesh_size: f64,
}

impl Partition {
    pub fn num_cells(&self) -> usize {
        self.anchors.len()
    }

    /// Sites of every cell, in increasing index order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.num_cells()];
        for (i, &c) in self.cell_of.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }

    /// CSV with header `site_index,cell_id,is_anchor`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("site_index,cell_id,is_anchor\n");
        for (i, &c) in self.cell_of.iter().enumerate() {
            let _ = writeln!(s, "{i},{c},{}", u8::from(self.anchors[c] == i));
        }
        s
    }

    /// Structural checks: cell ids in range, nonempty cells, anchors inside
    /// their own cell.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.cell_of.len() != n {
            return Err(Error::SizeMismatch {
                sites: n,
                values: self.cell_of.len(),
            });
        }
        let m = self.num_cells();
        let mut seen = vec![false; m];
        for &c in &self.cell_of {
            if c >= m {
                return Err(Error::IndexOutOfRange { index: c, len: m });
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("partition has an empty cell"));
        }
        for (c, &a) in self.anchors.iter().enumerate() {
            if a >= n || self.cell_of[a] != c {
                return Err(Error::invalid(format!("anchor {a} is not in cell {c}")));
            }
        }
        Ok(())
    }
}

/// Nearest-center cells; ties go to the center picked first by the greedy
/// loop. The cached mesh size is twice the largest site-to-anchor distance.
pub fn voronoi_partition(ps: &PointSet, centers: &Covering) -> Result<Partition> {
    let cs = &centers.center_indices;
    if cs.is_empty() {
        return Err(Error::invalid(
            "Voronoi partition needs at least one center",
        ));
    }
    if let Some(&c) = cs.iter().find(|&&c| c >= ps.len()) {
        return Err(Error::IndexOutOfRange {
            index: c,
            len: ps.len(),
        });
    }
    let center_set = ps.subset(cs);
    let tree = if cs.len() > 64 {
        ClusterTree::build(&center_set, 8).ok()
    } else {
        None
    };
    let nearest: Vec<(usize, f64)> = par::map_range(ps.len(), |i| {
        let x = ps.point(i);
        match &tree {
            Some(t) => t.nearest(&center_set, x),
            None => {
                let mut best = (0, center_set.dist_to(x, 0));
                for k in 1..cs.len() {
                    let d = center_set.dist_to(x, k);
                    if d < best.1 {
                        best = (k, d);
                    }
                }
                best
            }
        }
    });
    // a center always lands in its own cell unless it duplicates an earlier one
    let mut cell_of: Vec<usize> = nearest.iter().map(|&(k, _)| k).collect();
    let reach = nearest.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    let mut remap = vec![usize::MAX; cs.len()];
    let mut anchors = Vec::new();
    for (k, &c) in cs.iter().enumerate() {
        if cell_of[c] == k {
            remap[k] = anchors.len();
            anchors.push(c);
        }
    }
    for c in cell_of.iter_mut() {
        *c = remap[*c];
    }
    Ok(Partition {
        cell_of,
        anchors,
        mesh_size: 2.0 * reach,
    })
}

/// Upper bound on the diameter of a tree cell from its bounding box.
fn box_bound(tree: &ClusterTree, metric: &Metric, id: usize) -> f64 {
    let diag = tree.box_diagonal(id);
    match metric {
        Metric::GreatCircle => 2.0 * (diag / 2.0).min(1.0).asin(),
        _ => diag,
    }
}

/// Nested anchors for every tree node: a uniformly random site per leaf,
/// and for an inner node the anchor of its first child.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeAnchors {
    anchor: Vec<usize>,
}

impl NodeAnchors {
    pub fn random(tree: &ClusterTree, seed: u64) -> Self {
        let nodes = tree.nodes();
        let mut anchor = vec![usize::MAX; nodes.len()];
        // children have larger ids than their parents
        for id in (0..nodes.len()).rev() {
            let node = &nodes[id];
            anchor[id] = if node.is_leaf() {
                let idx = tree.indices(id);
                let mut rng = rng_for(seed, &[id as u64]);
                idx[rng.random_range(0..idx.len())]
            } else {
                anchor[node.first_child]
            };
        }
        NodeAnchors { anchor }
    }

    pub fn of(&self, node: usize) -> usize {
        self.anchor[node]
    }
}

fn partition_from_cells(
    tree: &ClusterTree,
    ps: &PointSet,
    level: usize,
    mut pick: impl FnMut(usize) -> usize,
) -> Result<Partition> {
    if tree.len() != ps.len() {
        return Err(Error::invalid(
            "cluster tree was built over a different point set",
        ));
    }
    if level > tree.depth() {
        return Err(Error::invalid(format!(
            "level {level} exceeds tree depth {}",
            tree.depth()
        )));
    }
    let cells = tree.level_cells(level);
    let mut cell_of = vec![0; ps.len()];
    let mut anchors = Vec::with_capacity(cells.len());
    let mut mesh = 0.0f64;
    for (c, &id) in cells.iter().enumerate() {
        for &i in tree.indices(id) {
            cell_of[i] = c;
        }
        anchors.push(pick(id));
        if tree.node(id).len() > 1 {
            mesh = mesh.max(box_bound(tree, ps.metric(), id));
        }
    }
    Ok(Partition {
        cell_of,
        anchors,
        mesh_size: mesh,
    })
}

/// Cells are the tree clusters at `level` (leaves ending above `level`
/// stand in for their missing descendants); one seeded random anchor per
/// cell, drawn independently.
pub fn tree_partition(
    tree: &ClusterTree,
    ps: &PointSet,
    level: usize,
    seed: u64,
) -> Result<Partition> {
    partition_from_cells(tree, ps, level, |id| {
        let idx = tree.indices(id);
        let mut rng = rng_for(seed, &[level as u64, id as u64]);
        idx[rng.random_range(0..idx.len())]
    })
}

/// Like [`tree_partition`] but with nested anchors, so every level-`j`
/// anchor is also a level-`j+1` anchor.
pub fn tree_partition_nested(
    tree: &ClusterTree,
    ps: &PointSet,
    level: usize,
    anchors: &NodeAnchors,
) -> Result<Partition> {
    partition_from_cells(tree, ps, level, |id| anchors.of(id))
}

/// Value at the anchor of each site's cell.
pub fn interpolate(ds: &LabeledDataset, part: &Partition) -> Result<PointSet> {
    part.validate(ds.len())?;
    let rows: Vec<usize> = part.cell_of.iter().map(|&c| part.anchors[c]).collect();
    Ok(ds.values.subset(&rows))
}

/// `max_i d_Y(y_i, approx_i)`.
pub fn interpolation_error(ds: &LabeledDataset, approx: &PointSet) -> Result<f64> {
    if approx.len() != ds.len() {
        return Err(Error::SizeMismatch {
            sites: ds.len(),
            values: approx.len(),
        });
    }
    if approx.dim() != ds.values.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.values.dim(),
            got: approx.dim(),
        });
    }
    Ok(par::max_range(ds.len(), 0.0, |i| {
        ds.values
            .metric()
            .distance(ds.values.point(i), approx.point(i))
    }))
}

/// Largest cell diameter measured with the site metric.
pub fn exact_mesh_size(ps: &PointSet, part: &Partition) -> f64 {
    part.cells()
        .iter()
        .map(|cell| {
            par::max_range(cell.len(), 0.0, |a| {
                cell[a + 1..]
                    .iter()
                    .map(|&j| ps.dist(cell[a], j))
                    .fold(0.0, f64::max)
            })
        })
        .fold(0.0, f64::max)
}
