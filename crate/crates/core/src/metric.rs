//! Metric spaces, point sets and labeled datasets, together with the
//! geometric summaries used throughout the crate: separation distance, fill
//! distance and diameter.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::spatial::ClusterTree;

/// Tolerance on the Euclidean norm of points handed to the great-circle metric.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

/// Point sets up to this size may cache their full distance matrix.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// User-supplied distance. It must be total, deterministic and satisfy the
/// metric axioms; none of that is checked at call time.
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// The distance on a point set.
#[derive(Clone)]
pub enum Metric {
    /// `|x - y|` on the real line.
    Absolute,
    /// Euclidean distance in `R^k`.
    Euclidean,
    /// Geodesic distance on the unit sphere in `R^3`.
    GreatCircle,
    Custom(DistanceFn),
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Absolute => f.write_str("Absolute"),
            Metric::Euclidean => f.write_str("Euclidean"),
            Metric::GreatCircle => f.write_str("GreatCircle"),
            Metric::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Metric {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Metric::Custom(Arc::new(f))
    }

    /// Distance between two coordinate vectors of equal length.
    #[inline]
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Metric::Absolute => (x[0] - y[0]).abs(),
            Metric::Euclidean => euclidean(x, y),
            Metric::GreatCircle => great_circle(x, y),
            Metric::Custom(f) => f(x, y),
        }
    }

    /// Whether distances are bounded below by the Euclidean distance of the
    /// coordinates, which is what the bounding-box pruning of the cluster
    /// tree relies on.
    pub fn has_embedding(&self) -> bool {
        !matches!(self, Metric::Custom(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Absolute => "abs",
            Metric::Euclidean => "euclidean",
            Metric::GreatCircle => "sphere",
            Metric::Custom(_) => "custom",
        }
    }
}

#[inline]
fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// `atan2(|x × y|, x · y)`; well conditioned near both 0 and π.
#[inline]
fn great_circle(x: &[f64], y: &[f64]) -> f64 {
    let cx = x[1] * y[2] - x[2] * y[1];
    let cy = x[2] * y[0] - x[0] * y[2];
    let cz = x[0] * y[1] - x[1] * y[0];
    let cross = (cx * cx + cy * cy + cz * cz).sqrt();
    let dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
    cross.atan2(dot)
}

/// A finite set of points sharing one dimension and one metric.
#[derive(Clone, Debug)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
    metric: Metric,
}

impl PointSet {
    /// Builds a point set from a flat row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>, metric: Metric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        let ps = PointSet {
            coords,
            dim,
            metric,
        };
        ps.validate()?;
        Ok(ps)
    }

    pub fn from_rows(rows: &[Vec<f64>], metric: Metric) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::EmptyPointSet)?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(dim, coords, metric)
    }

    /// Points on the real line with the absolute-difference metric.
    pub fn line(xs: Vec<f64>) -> Self {
        PointSet {
            coords: xs,
            dim: 1,
            metric: Metric::Absolute,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Metric::Absolute = self.metric {
            if self.dim != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: self.dim,
                });
            }
        }
        if let Metric::GreatCircle = self.metric {
            if self.dim != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    got: self.dim,
                });
            }
            for i in 0..self.len() {
                let norm = euclidean(self.point(i), &[0.0; 3]);
                if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(Error::NotOnSphere { index: i, norm });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Distance between points `i` and `j` without bounds checks beyond the
    /// slice indexing.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.metric.distance(self.point(i), self.point(j))
    }

    /// Distance from an arbitrary coordinate vector to point `i`.
    #[inline]
    pub fn dist_to(&self, x: &[f64], i: usize) -> f64 {
        self.metric.distance(x, self.point(i))
    }

    /// The 1-D coordinates, when the set lives on the real line.
    pub fn as_line(&self) -> Option<&[f64]> {
        (self.dim == 1).then_some(&self.coords[..])
    }

    /// A new point set holding the listed points, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointSet {
            coords,
            dim: self.dim,
            metric: self.metric.clone(),
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Result<Self> {
        self.metric = metric;
        self.validate()?;
        Ok(self)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Site-to-value map: data sites with their metric and data values with
/// theirs.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub sites: PointSet,
    pub values: PointSet,
}

impl LabeledDataset {
    pub fn new(sites: PointSet, values: PointSet) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::SizeMismatch {
                sites: sites.len(),
                values: values.len(),
            });
        }
        if sites.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        Ok(LabeledDataset { sites, values })
    }

    /// Real-valued data with `|y - y'|` as value metric.
    pub fn scalar(sites: PointSet, values: Vec<f64>) -> Result<Self> {
        Self::new(sites, PointSet::line(values))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn value_dist(&self, i: usize, j: usize) -> f64 {
        self.values.dist(i, j)
    }

    /// Scalar values, when the value space is the real line.
    pub fn scalar_values(&self) -> Option<&[f64]> {
        match self.values.metric() {
            Metric::Absolute => self.values.as_line(),
            _ => None,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            sites: self.sites.subset(indices),
            values: self.values.subset(indices),
        }
    }
}

/// Dense cache of all pairwise distances, only built for small sets.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Materializes the matrix when `ps.len() <= cap`, otherwise returns
    /// `None`.
    pub fn build(ps: &PointSet, cap: usize) -> Option<Self> {
        let n = ps.len();
        if n > cap {
            return None;
        }
        let rows = par::map_range(n, |i| (0..n).map(|j| ps.dist(i, j)).collect::<Vec<_>>());
        Some(DistanceMatrix {
            n,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// `d(x_i, x_j)` with index validation.
pub fn pairwise_distance(ps: &PointSet, i: usize, j: usize) -> Result<f64> {
    ps.check_index(i)?;
    ps.check_index(j)?;
    Ok(ps.dist(i, j))
}

fn sorted_line(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Smallest distance between two distinct points.
pub fn separation_distance(ps: &PointSet) -> Result<f64> {
    let n = ps.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if let (Metric::Absolute, Some(xs)) = (ps.metric(), ps.as_line()) {
        let s = sorted_line(xs);
        return Ok(s
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min));
    }
    Ok(par::min_range(n, f64::INFINITY, |i| {
        ((i + 1)..n)
            .map(|j| ps.dist(i, j))
            .fold(f64::INFINITY, f64::min)
    }))
}

/// Largest pairwise distance; zero for a singleton.
pub fn diameter(ps: &PointSet) -> Result<f64> {
    let n = ps.len();
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    if let (Metric::Absolute, Some(xs)) = (ps.metric(), ps.as_line()) {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(hi - lo);
    }
    Ok(par::max_range(n, 0.0, |i| {
        ((i + 1)..n).map(|j| ps.dist(i, j)).fold(0.0, f64::max)
    }))
}

/// Fill distance of `ps` with respect to the finite reference set `ambient`:
/// the largest distance from an ambient point to its nearest point of `ps`.
pub fn fill_distance(ps: &PointSet, ambient: &PointSet) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if ps.dim() != ambient.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            got: ambient.dim(),
        });
    }
    if ps.metric().has_embedding() && ps.len() > 64 {
        let tree = ClusterTree::build(ps, crate::spatial::DEFAULT_LEAF_MAX)?;
        return Ok(par::max_range(ambient.len(), 0.0, |a| {
            tree.nearest(ps, ambient.point(a)).1
        }));
    }
    Ok(par::max_range(ambient.len(), 0.0, |a| {
        let x = ambient.point(a);
        (0..ps.len())
            .map(|i| ps.dist_to(x, i))
            .fold(f64::INFINITY, f64::min)
    }))
}

/// Fill distance of 1-D sites with respect to the whole interval `[lo, hi]`.
///
/// The farthest point of the interval from the sites is either an endpoint
/// or the midpoint of a gap between consecutive sites.
pub fn fill_distance_interval(ps: &PointSet, lo: f64, hi: f64) -> Result<f64> {
    let xs = match (ps.metric(), ps.as_line()) {
        (Metric::Absolute, Some(xs)) => xs,
        _ => {
            return Err(Error::invalid(
                "continuum fill distance needs 1-D sites with the absolute metric",
            ))
        }
    };
    if xs.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(lo <= hi) {
        return Err(Error::invalid(format!("empty interval [{lo}, {hi}]")));
    }
    let s = sorted_line(xs);
    let mut h = (s[0] - lo).max(0.0).max((hi - s[s.len() - 1]).max(0.0));
    for w in s.windows(2) {
        let (a, b) = (w[0].clamp(lo, hi), w[1].clamp(lo, hi));
        h = h.max((b - a) / 2.0);
    }
    Ok(h)
}

/// Ratio `h / q` of fill to separation distance.
pub fn quasi_uniformity_ratio(fill: f64, separation: f64) -> f64 {
    fill / separation
}
