//! Exact discrete modulus of continuity.
//!
//! For a site-to-value map `f_N : X_N -> Y_N` the discrete modulus is
//!
//! ```text
//! ω_N(Y_N, t) = max { d_Y(y_i, y_j) : d_X(x_i, x_j) <= t }
//! ```
//!
//! which is a nondecreasing, right-continuous step function of `t` with
//! jumps only at realized site distances. Everything here is a brute-force
//! pair scan; see [`crate::sketch`] for the coarsened evaluation.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::{LabeledDataset, Metric};
use crate::par;
use crate::spatial::ClusterTree;

/// Right-continuous nondecreasing step function on `[0, ∞)` that is zero
/// before its first breakpoint. Only strict increases are stored.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Builds a step function from raw `(t, value)` jumps; rejects
    /// non-increasing breakpoints or decreasing values.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::invalid("breakpoints and values differ in length"));
        }
        if breakpoints.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::invalid("breakpoints must be finite and nonnegative"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0)) || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(
                "values must be nonnegative and nondecreasing",
            ));
        }
        Ok(StepFunction {
            breakpoints,
            values,
        })
    }

    /// Running-max compression of pairs sorted by distance.
    fn from_sorted_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut out = StepFunction::default();
        for (d, v) in pairs {
            out.push_jump(d, v);
        }
        out
    }

    fn push_jump(&mut self, d: f64, v: f64) {
        let current = self.values.last().copied().unwrap_or(0.0);
        if v <= current {
            return;
        }
        if self.breakpoints.last() == Some(&d) {
            *self.values.last_mut().unwrap() = v;
        } else {
            self.breakpoints.push(d);
            self.values.push(v);
        }
    }

    /// Pointwise max of two step functions.
    pub fn max_merge(&self, other: &StepFunction) -> StepFunction {
        let mut pairs: Vec<(f64, f64)> = self
            .breakpoints
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .chain(
                other
                    .breakpoints
                    .iter()
                    .copied()
                    .zip(other.values.iter().copied()),
            )
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_sorted_pairs(pairs)
    }

    /// Value at the largest breakpoint `<= t`, or zero.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// CSV with header `breakpoint,value`; floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("breakpoint,value\n");
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            let _ = writeln!(s, "{b:?},{v:?}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad step-function row {:?}", rec)))
            };
            bps.push(parse(0)?);
            vals.push(parse(1)?);
        }
        Self::new(bps, vals)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Weight class `ρ` used in the discrete `ρ`-seminorm.
#[derive(Clone, Debug, PartialEq)]
pub enum RhoClass {
    /// `t^α` with `α ∈ (0, 1]`.
    Power { alpha: f64 },
    /// `|log(t/π) - 2|^{-1}` on `(0, π)`, `1/2` from `π` on, `0` at `0`.
    LogType,
    /// Right-continuous lookup table, zero before the first breakpoint.
    Table {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl RhoClass {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "Hölder exponent {alpha} not in (0, 1]"
            )));
        }
        Ok(RhoClass::Power { alpha })
    }

    /// The constant zero class.
    pub fn zero() -> Self {
        RhoClass::Table {
            breakpoints: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn table(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        StepFunction::new(breakpoints.clone(), values.clone())?;
        Ok(RhoClass::Table {
            breakpoints,
            values,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RhoClass::Power { alpha } => {
                if *alpha == 1.0 {
                    t
                } else {
                    t.powf(*alpha)
                }
            }
            RhoClass::LogType => log_sphere(t),
            RhoClass::Table {
                breakpoints,
                values,
            } => {
                let k = breakpoints.partition_point(|&b| b <= t);
                if k == 0 {
                    0.0
                } else {
                    values[k - 1]
                }
            }
        }
    }
}

fn log_sphere(t: f64) -> f64 {
    use std::f64::consts::PI;
    if t <= 0.0 {
        0.0
    } else if t < PI {
        1.0 / ((t / PI).ln() - 2.0).abs()
    } else {
        0.5
    }
}

/// Closed-form moduli of the analytic test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticModulus {
    /// `√x` on `[0, 1]`: `√t` up to `t = 1`, then `1`.
    Sqrt1d,
    /// `|log x - 2|^{-1}` on `[0, 1]`: same expression in `t` on `(0, 1)`,
    /// then `1/2`.
    Log1d,
    /// `|log(d(x, x0)/π) - 2|^{-1}` on the unit sphere.
    LogSphere,
    /// Lévy's modulus of Brownian paths, `√(2 t log(1/t))` on `(0, 1)`.
    WienerApprox,
}

impl AnalyticModulus {
    pub fn eval(self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("modulus argument {t} is negative")));
        }
        Ok(match self {
            AnalyticModulus::Sqrt1d => t.min(1.0).sqrt(),
            AnalyticModulus::Log1d => {
                if t == 0.0 {
                    0.0
                } else if t < 1.0 {
                    1.0 / (t.ln() - 2.0).abs()
                } else {
                    0.5
                }
            }
            AnalyticModulus::LogSphere => log_sphere(t),
            AnalyticModulus::WienerApprox => {
                if t == 0.0 || t >= 1.0 {
                    return Err(Error::Domain(format!(
                        "Wiener modulus approximation is only defined on (0, 1), got {t}"
                    )));
                }
                (2.0 * t * (1.0 / t).ln()).sqrt()
            }
        })
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "sqrt-1d" => Some(AnalyticModulus::Sqrt1d),
            "log-1d" => Some(AnalyticModulus::Log1d),
            "log-sphere" => Some(AnalyticModulus::LogSphere),
            "wiener-approx" => Some(AnalyticModulus::WienerApprox),
            _ => None,
        }
    }
}

/// `analytic_modulus(name, t)` by name.
pub fn analytic_modulus(name: AnalyticModulus, t: f64) -> Result<f64> {
    name.eval(t)
}

/// `ω_N(Y_N, t)` by scanning all pairs.
pub fn modulus_at(ds: &LabeledDataset, t: f64) -> f64 {
    let n = ds.len();
    par::max_range(n, 0.0, |i| {
        let mut m = 0.0f64;
        for j in (i + 1)..n {
            if ds.sites.dist(i, j) <= t {
                m = m.max(ds.value_dist(i, j));
            }
        }
        m
    })
}

/// `ω_N(Y_N, t)` for many `t` in a single pair scan. Each pair is charged to
/// the smallest query it qualifies for, followed by a running max over the
/// sorted queries; the result equals calling [`modulus_at`] per query.
pub fn modulus_at_many(ds: &LabeledDataset, ts: &[f64]) -> Vec<f64> {
    let n = ds.len();
    let (order, sorted) = sort_queries(ts);
    if sorted.is_empty() {
        return Vec::new();
    }
    let tmax = *sorted.last().unwrap();
    let buckets = par::max_buckets(n, sorted.len(), |i, acc| {
        for j in (i + 1)..n {
            let d = ds.sites.dist(i, j);
            if d <= tmax {
                let v = ds.value_dist(i, j);
                let q = sorted.partition_point(|&t| t < d);
                if v > acc[q] {
                    acc[q] = v;
                }
            }
        }
    });
    unsort_running_max(&order, buckets)
}

/// Sorts queries ascending; returns the permutation and sorted values.
pub(crate) fn sort_queries(ts: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let sorted = order.iter().map(|&k| ts[k]).collect();
    (order, sorted)
}

pub(crate) fn unsort_running_max(order: &[usize], mut buckets: Vec<f64>) -> Vec<f64> {
    for q in 1..buckets.len() {
        if buckets[q - 1] > buckets[q] {
            buckets[q] = buckets[q - 1];
        }
    }
    let mut out = vec![0.0; order.len()];
    for (q, &k) in order.iter().enumerate() {
        out[k] = buckets[q];
    }
    out
}

/// `ω_N(Y_N, t)` using ε-range search on a cluster tree built over
/// `ds.sites`. Same value as [`modulus_at`].
pub fn modulus_at_indexed(ds: &LabeledDataset, tree: &ClusterTree, t: f64) -> f64 {
    par::max_range(ds.len(), 0.0, |i| {
        let mut m = 0.0f64;
        tree.for_each_in_ball(&ds.sites, ds.sites.point(i), t, |j, _| {
            if j > i {
                m = m.max(ds.value_dist(i, j));
            }
        });
        m
    })
}

/// Many-query variant of [`modulus_at_indexed`]; pairs farther apart than the
/// largest query are never visited.
pub fn modulus_at_many_indexed(ds: &LabeledDataset, tree: &ClusterTree, ts: &[f64]) -> Vec<f64> {
    let (order, sorted) = sort_queries(ts);
    if sorted.is_empty() {
        return Vec::new();
    }
    let tmax = *sorted.last().unwrap();
    let buckets = par::max_buckets(ds.len(), sorted.len(), |i, acc| {
        tree.for_each_in_ball(&ds.sites, ds.sites.point(i), tmax, |j, d| {
            if j > i {
                let v = ds.value_dist(i, j);
                let q = sorted.partition_point(|&t| t < d);
                if v > acc[q] {
                    acc[q] = v;
                }
            }
        });
    });
    unsort_running_max(&order, buckets)
}

/// The complete step function `t ↦ ω_N(Y_N, t)`.
///
/// Rows of the pair scan are reduced to their own running-max frontier and
/// merged; pairs already dominated by the frontier accumulated so far are
/// dropped before sorting.
pub fn modulus_full(ds: &LabeledDataset) -> StepFunction {
    let n = ds.len();
    if let (Metric::Absolute, Some(xs)) = (ds.sites.metric(), ds.sites.as_line()) {
        return modulus_full_line(ds, xs);
    }
    par::fold_reduce(
        n,
        StepFunction::default,
        |acc, i| {
            let mut pairs: Vec<(f64, f64)> = ((i + 1)..n)
                .filter_map(|j| {
                    let d = ds.sites.dist(i, j);
                    let v = ds.value_dist(i, j);
                    (v > acc.eval(d)).then_some((d, v))
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            acc.max_merge(&StepFunction::from_sorted_pairs(pairs))
        },
        |a, b| a.max_merge(&b),
    )
}

/// 1-D sites: in sorted order the distance grows along each row, so every
/// row's frontier is a single scan.
fn modulus_full_line(ds: &LabeledDataset, xs: &[f64]) -> StepFunction {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    par::fold_reduce(
        n,
        StepFunction::default,
        |acc, a| {
            let i = order[a];
            let mut row = StepFunction::default();
            for &j in &order[a + 1..] {
                row.push_jump(ds.sites.dist(i, j), ds.value_dist(i, j));
            }
            acc.max_merge(&row)
        },
        |a, b| a.max_merge(&b),
    )
}

/// Discrete `ρ`-seminorm `max_{i≠j, d_ij > 0} ω_N(Y_N, d_ij) / ρ(d_ij)`.
///
/// Since `ω_N` is constant between breakpoints and `ρ` is nondecreasing,
/// the maximum over realized distances is attained at a breakpoint or at the
/// smallest positive distance.
pub fn seminorm(ds: &LabeledDataset, rho: &RhoClass) -> Result<f64> {
    let n = ds.len();
    if n < 2 {
        return Ok(0.0);
    }
    let qpos = par::min_range(n, f64::INFINITY, |i| {
        ((i + 1)..n)
            .map(|j| ds.sites.dist(i, j))
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    });
    if !qpos.is_finite() {
        // all sites coincide
        return Ok(0.0);
    }
    let r = rho.eval(qpos);
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "ρ vanishes at the realized distance {qpos}"
        )));
    }
    let omega = modulus_full(ds);
    let mut best = omega.eval(qpos) / r;
    for (&b, &v) in omega.breakpoints().iter().zip(omega.values()) {
        if b > qpos {
            best = best.max(v / rho.eval(b));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PointSet;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fig1(values: &[f64]) -> LabeledDataset {
        LabeledDataset::scalar(
            PointSet::line((1..=6).map(f64::from).collect()),
            values.to_vec(),
        )
        .unwrap()
    }

    const F: [f64; 6] = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
    const G: [f64; 6] = [3.0, 2.0, 3.0, 3.0, 4.0, 3.0];

    /// Reference seminorm straight from the definition.
    fn seminorm_brute(ds: &LabeledDataset, rho: &RhoClass) -> f64 {
        let mut best = 0.0f64;
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                let d = ds.sites.dist(i, j);
                if i != j && d > 0.0 {
                    best = best.max(modulus_at(ds, d) / rho.eval(d));
                }
            }
        }
        best
    }

    #[test]
    fn zigzag_point_values() {
        assert_eq!(modulus_at(&fig1(&F), 1.0), 3.0);
        assert_eq!(modulus_at(&fig1(&F), 5.0), 5.0);
        assert_eq!(modulus_at(&fig1(&G), 3.0), 2.0);
        assert_eq!(modulus_at(&fig1(&F), 0.999), 0.0);
    }

    #[test]
    fn zigzag_step_functions() {
        let f = modulus_full(&fig1(&F));
        assert_eq!(f.breakpoints(), &[1.0, 3.0, 5.0]);
        assert_eq!(f.values(), &[3.0, 4.0, 5.0]);
        let g = modulus_full(&fig1(&G));
        assert_eq!(g.breakpoints(), &[1.0, 3.0]);
        assert_eq!(g.values(), &[1.0, 2.0]);
        assert!(modulus_full(&fig1(&[2.0; 6])).is_zero());
    }

    #[test]
    fn step_function_eval_is_right_continuous() {
        let f = StepFunction::new(vec![1.0, 3.0], vec![2.0, 5.0]).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.9999), 0.0);
        assert_eq!(f.eval(1.0), 2.0);
        assert_eq!(f.eval(2.9), 2.0);
        assert_eq!(f.eval(3.0), 5.0);
        assert!(StepFunction::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![1.0, 2.0], vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn step_function_csv_round_trip() {
        let f =
            StepFunction::new(vec![1e-300, 0.1 + 0.2, 7.0], vec![1.0 / 3.0, 0.5, 1e300]).unwrap();
        assert_eq!(StepFunction::from_csv(&f.to_csv()).unwrap(), f);
    }

    #[test]
    fn seminorm_examples() {
        let grid = PointSet::line((0..=4).map(|k| k as f64 * 0.25).collect());
        let lin = LabeledDataset::scalar(grid.clone(), (0..=4).map(|k| 0.5 * k as f64).collect())
            .unwrap();
        assert_eq!(seminorm(&lin, &RhoClass::power(1.0).unwrap()).unwrap(), 2.0);
        let flat = LabeledDataset::scalar(grid, vec![3.0; 5]).unwrap();
        assert_eq!(seminorm(&flat, &RhoClass::LogType).unwrap(), 0.0);
    }

    #[test]
    fn seminorm_rejects_vanishing_rho() {
        let ds = fig1(&F);
        let rho = RhoClass::table(vec![2.0], vec![1.0]).unwrap();
        assert!(matches!(seminorm(&ds, &rho), Err(Error::Domain(_))));
    }

    #[test]
    fn sqrt_holder_seminorm_converges_to_one() {
        let rho = RhoClass::power(0.5).unwrap();
        let mut prev = 0.0;
        for n in [9usize, 17, 33, 65] {
            let xs: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
            let ys = xs.iter().map(|x| x.sqrt()).collect();
            let ds = LabeledDataset::scalar(PointSet::line(xs), ys).unwrap();
            let s = seminorm(&ds, &rho).unwrap();
            assert_eq!(s, seminorm_brute(&ds, &rho));
            assert!(s > 0.0 && s <= 1.0 + 1e-12);
            assert!(s >= prev - 1e-12);
            prev = s;
        }
        assert!((prev - 1.0).abs() < 1e-12, "{prev}");
    }

    #[test]
    fn analytic_examples() {
        use AnalyticModulus::*;
        assert_eq!(LogSphere.eval(PI).unwrap(), 0.5);
        assert_eq!(LogSphere.eval(0.0).unwrap(), 0.0);
        assert_eq!(Sqrt1d.eval(0.25).unwrap(), 0.5);
        assert_eq!(Sqrt1d.eval(4.0).unwrap(), 1.0);
        assert_eq!(Log1d.eval(1.0).unwrap(), 0.5);
        assert!(WienerApprox.eval(0.0).is_err());
        assert!(WienerApprox.eval(1.0).is_err());
        assert!(Sqrt1d.eval(-1.0).is_err());
        let w = WienerApprox.eval(0.01).unwrap();
        assert!((w - (0.02f64 * 100f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sqrt_modulus_matches_sup_over_pairs() {
        // sup over |√x - √x'| with |x - x'| <= t on a fine grid
        let grid: Vec<f64> = (0..=2000).map(|k| k as f64 / 2000.0).collect();
        for t in [0.05, 0.25, 0.6] {
            let mut best = 0.0f64;
            for &x in &grid {
                let x2 = (x + t).min(1.0);
                best = best.max(x2.sqrt() - x.sqrt());
            }
            assert!((best - AnalyticModulus::Sqrt1d.eval(t).unwrap()).abs() < 1e-12);
        }
    }

    fn dataset_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..10.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    fn planar(xs: &[f64], ys: &[f64]) -> LabeledDataset {
        let rows: Vec<Vec<f64>> = xs
            .chunks(2)
            .filter(|c| c.len() == 2)
            .map(|c| c.to_vec())
            .collect();
        let m = rows.len();
        LabeledDataset::scalar(
            PointSet::from_rows(&rows, Metric::Euclidean).unwrap(),
            ys[..m].to_vec(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn full_agrees_with_pointwise((xs, ys) in dataset_strategy(), ts in prop::collection::vec(0.0f64..12.0, 20)) {
            let line = LabeledDataset::scalar(PointSet::line(xs.clone()), ys.clone()).unwrap();
            let plane = planar(&xs, &ys);
            for ds in [line, plane] {
                let full = modulus_full(&ds);
                let many = modulus_at_many(&ds, &ts);
                let tree = ClusterTree::build(&ds.sites, 3).unwrap();
                let many_idx = modulus_at_many_indexed(&ds, &tree, &ts);
                for (k, &t) in ts.iter().enumerate() {
                    let exact = modulus_at(&ds, t);
                    prop_assert_eq!(full.eval(t), exact);
                    prop_assert_eq!(many[k], exact);
                    prop_assert_eq!(many_idx[k], exact);
                    prop_assert_eq!(modulus_at_indexed(&ds, &tree, t), exact);
                }
                for &b in full.breakpoints() {
                    prop_assert_eq!(full.eval(b), modulus_at(&ds, b));
                }
            }
        }

        #[test]
        fn monotone_in_t_and_saturates((xs, ys) in dataset_strategy()) {
            let ds = LabeledDataset::scalar(PointSet::line(xs.clone()), ys.clone()).unwrap();
            let full = modulus_full(&ds);
            let diam = crate::metric::diameter(&ds.sites).unwrap();
            let global = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert_eq!(full.eval(diam), global);
            let mut prev = 0.0;
            for k in 0..=100 {
                let v = full.eval(diam * k as f64 / 100.0);
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn monotone_under_inclusion((xs, ys) in dataset_strategy(), keep in prop::collection::vec(any::<bool>(), 40)) {
            let ds = LabeledDataset::scalar(PointSet::line(xs.clone()), ys.clone()).unwrap();
            let idx: Vec<usize> = (0..xs.len()).filter(|&i| keep[i] || i == 0).collect();
            let sub = ds.subset(&idx);
            let big = modulus_full(&ds);
            let small = modulus_full(&sub);
            for k in 0..=60 {
                let t = k as f64 * 0.2;
                prop_assert!(small.eval(t) <= big.eval(t));
            }
            for alpha in [0.25, 0.5, 1.0] {
                let rho = RhoClass::power(alpha).unwrap();
                if let (Ok(a), Ok(b)) = (seminorm(&sub, &rho), seminorm(&ds, &rho)) {
                    prop_assert!(a <= b * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn seminorm_matches_definition_and_bounds_modulus((xs, ys) in dataset_strategy()) {
            let ds = LabeledDataset::scalar(PointSet::line(xs.clone()), ys.clone()).unwrap();
            for alpha in [0.25, 0.5, 1.0] {
                let rho = RhoClass::power(alpha).unwrap();
                let s = seminorm(&ds, &rho).unwrap();
                let brute = seminorm_brute(&ds, &rho);
                prop_assert!((s - brute).abs() <= 1e-12 * brute.max(1.0));
                for i in 0..ds.len() {
                    for j in (i + 1)..ds.len() {
                        let d = ds.sites.dist(i, j);
                        if d > 0.0 {
                            prop_assert!(modulus_at(&ds, d) <= rho.eval(d) * s * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }
}
