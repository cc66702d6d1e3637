//! Greedy set cover by closed metric balls and covering bounds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::metric::PointSet;
use crate::par;
use crate::spatial::{eps_neighbors, ClusterTree};

/// Result of [`greedy_cover`].
#[derive(Clone, Debug, PartialEq)]
pub struct Covering {
    /// Centers in the order the greedy loop picked them.
    pub center_indices: Vec<usize>,
    pub radius: f64,
    /// `assignment[i]` is the greedy step whose ball first covered site `i`.
    pub assignment: Vec<usize>,
}

impl Covering {
    pub fn len(&self) -> usize {
        self.center_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center_indices.is_empty()
    }

    /// Checks that every site lies in a closed ball around some center.
    pub fn covers(&self, ps: &PointSet) -> bool {
        (0..ps.len()).all(|i| {
            self.center_indices
                .iter()
                .any(|&c| ps.dist(c, i) <= self.radius)
        })
    }

    /// CSV with header `center_index,step`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("center_index,step\n");
        for (step, c) in self.center_indices.iter().enumerate() {
            let _ = writeln!(s, "{c},{step}");
        }
        s
    }
}

/// Symmetric closed-ball memberships `S_j = {z : d(x_j, x_z) <= radius}`.
fn ball_lists(ps: &PointSet, radius: f64, index: Option<&ClusterTree>) -> Vec<Vec<usize>> {
    let n = ps.len();
    match index {
        Some(tree) => par::map_range(n, |j| eps_neighbors(tree, ps, ps.point(j), radius)),
        None => par::map_range(n, |j| {
            (0..n)
                .filter(|&z| {
                    let (a, b) = if j < z { (j, z) } else { (z, j) };
                    ps.dist(a, b) <= radius
                })
                .collect()
        }),
    }
}

/// Greedy cover of `ps` by closed balls of the given radius centred at sites.
///
/// Each step picks the site whose ball contains the most uncovered sites,
/// lowest index on ties. Ball memberships are computed once, through the
/// cluster tree when one built over `ps` is supplied.
pub fn greedy_cover(ps: &PointSet, radius: f64, index: Option<&ClusterTree>) -> Result<Covering> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!(
            "cover radius {radius} must be positive"
        )));
    }
    if let Some(tree) = index {
        if tree.len() != ps.len() {
            return Err(Error::invalid(
                "cluster tree was built over a different point set",
            ));
        }
    }
    let n = ps.len();
    let lists = ball_lists(ps, radius, index);
    let mut count: Vec<usize> = lists.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = count
        .iter()
        .enumerate()
        .map(|(j, &c)| (c, Reverse(j)))
        .collect();
    let mut assignment = vec![usize::MAX; n];
    let mut centers = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let (c, Reverse(j)) = heap.pop().expect("uncovered sites left but heap empty");
        if c != count[j] {
            if count[j] > 0 {
                heap.push((count[j], Reverse(j)));
            }
            continue;
        }
        let step = centers.len();
        centers.push(j);
        for &z in &lists[j] {
            if assignment[z] == usize::MAX {
                assignment[z] = step;
                remaining -= 1;
                for &k in &lists[z] {
                    count[k] -= 1;
                }
            }
        }
    }
    Ok(Covering {
        center_indices: centers,
        radius,
        assignment,
    })
}

/// Size of the greedy cover: an upper bound on the covering number that is
/// within a factor `ln N + 1` of it.
pub fn covering_number_upper(ps: &PointSet, radius: f64) -> Result<usize> {
    Ok(greedy_cover(ps, radius, None)?.len())
}

/// `1 - cover_count · eta^N`, returned as is even when negative.
pub fn covering_probability_bound(cover_count: usize, eta: f64, n: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta = {eta} not in [0, 1)")));
    }
    if cover_count == 0 || n == 0 {
        return Err(Error::invalid(
            "cover count and sample size must be positive",
        ));
    }
    let n = i32::try_from(n).unwrap_or(i32::MAX);
    Ok(1.0 - cover_count as f64 * eta.powi(n))
}
