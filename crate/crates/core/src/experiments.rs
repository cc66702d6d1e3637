//! Convergence and approximation studies built from the library pieces.

use rand::Rng;

use crate::datagen::{derive_seed, fibonacci_lattice, iid_uniform, rng_for, uniform_grid};
use crate::error::{Error, Result};
use crate::interpolation::{exact_mesh_size, interpolate, interpolation_error, tree_partition};
use crate::metric::{LabeledDataset, PointSet};
use crate::mlmc::{hoelder_schedule, mlmc_mean, SphereFieldSampler, WienerSampler};
use crate::modulus::{modulus_full, AnalyticModulus, StepFunction};
use crate::par;
use crate::spatial::ClusterTree;

/// Quadratically graded points `t_k = (k/M)^2 · b`, `k = 0..=M`.
pub fn graded_grid(m: usize, b: f64) -> Vec<f64> {
    (0..=m)
        .map(|k| {
            let s = k as f64 / m as f64;
            s * s * b
        })
        .collect()
}

/// Composite trapezoid rule on a sorted grid.
pub fn trapezoid(ts: &[f64], fs: &[f64]) -> f64 {
    ts.windows(2)
        .zip(fs.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// `‖ω_N - ω‖_{L²(0, b)}` by the trapezoid rule on `grid`.
pub fn l2_distance(step: &StepFunction, target: AnalyticModulus, grid: &[f64]) -> Result<f64> {
    let sq = grid
        .iter()
        .map(|&t| Ok((step.eval(t) - target.eval(t)?).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(grid, &sq).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope fit needs two or more paired values"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("slope fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Test function on `[0, 1]` whose modulus is the given analytic one.
pub fn target_function(target: AnalyticModulus, x: f64) -> Result<f64> {
    match target {
        AnalyticModulus::Sqrt1d => Ok(x.sqrt()),
        AnalyticModulus::Log1d => Ok(if x == 0.0 {
            0.0
        } else {
            1.0 / (x.ln() - 2.0).abs()
        }),
        other => Err(Error::invalid(format!(
            "{other:?} is not a function on the unit interval"
        ))),
    }
}

/// How sites on `[0, 1]` are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteScheme {
    /// `N` equispaced points including both endpoints.
    Uniform,
    /// `N` sorted iid uniform points.
    IidUniform,
}

#[derive(Clone, Debug)]
pub struct ConsistencyConfig {
    pub target: AnalyticModulus,
    pub scheme: SiteScheme,
    pub ns: Vec<usize>,
    pub replicas: usize,
    /// Number of quadrature intervals on `[0, 1]`.
    pub quad_points: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

/// `L²(0, 1)` distance between `ω_N` and the analytic modulus for each `N`.
pub fn consistency_study(cfg: &ConsistencyConfig) -> Result<Vec<ConsistencyRow>> {
    target_function(cfg.target, 0.5)?;
    if cfg.quad_points == 0 || cfg.ns.is_empty() {
        return Err(Error::invalid(
            "quadrature size and N list must be nonempty",
        ));
    }
    let grid = graded_grid(cfg.quad_points, 1.0);
    let replicas = match cfg.scheme {
        SiteScheme::Uniform => 1,
        SiteScheme::IidUniform => cfg.replicas.max(1),
    };
    cfg.ns
        .iter()
        .enumerate()
        .map(|(ni, &n)| {
            let errs = (0..replicas)
                .map(|r| {
                    let xs = match cfg.scheme {
                        SiteScheme::Uniform => uniform_grid(n)?,
                        SiteScheme::IidUniform => {
                            iid_uniform(n, &mut rng_for(cfg.seed, &[ni as u64, r as u64]))
                        }
                    };
                    let ys = xs
                        .iter()
                        .map(|&x| target_function(cfg.target, x))
                        .collect::<Result<Vec<_>>>()?;
                    let ds = LabeledDataset::scalar(PointSet::line(xs), ys)?;
                    l2_distance(&modulus_full(&ds), cfg.target, &grid)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_error, std_error) = mean_std(&errs);
            Ok(ConsistencyRow {
                n,
                mean_error,
                std_error,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpRow {
    pub level: usize,
    pub cells: usize,
    /// Exact mesh size of the level partition.
    pub h: f64,
    pub mean_error: f64,
    pub std_error: f64,
    /// Largest error over the replicas.
    pub max_error: f64,
    /// Exact `ω_N(Y_N, h)`.
    pub omega: f64,
}

/// Interpolation error on tree partitions of every level, averaged over
/// replicas with independently drawn anchors.
pub fn interpolation_study(
    ds: &LabeledDataset,
    leaf_max: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<InterpRow>> {
    let tree = ClusterTree::build(&ds.sites, leaf_max)?;
    let omega = modulus_full(ds);
    let replicas = replicas.max(1);
    (0..=tree.depth())
        .map(|level| {
            let parts = (0..replicas)
                .map(|r| tree_partition(&tree, &ds.sites, level, derive_seed(seed, &[r as u64])))
                .collect::<Result<Vec<_>>>()?;
            let h = exact_mesh_size(&ds.sites, &parts[0]);
            let errs = parts
                .iter()
                .map(|p| interpolation_error(ds, &interpolate(ds, p)?))
                .collect::<Result<Vec<f64>>>()?;
            let (mean_error, std_error) = mean_std(&errs);
            Ok(InterpRow {
                level,
                cells: parts[0].num_cells(),
                h,
                mean_error,
                std_error,
                max_error: errs.iter().copied().fold(0.0, f64::max),
                omega: omega.eval(h),
            })
        })
        .collect()
}

/// Field used by [`mlmc_study`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlmcField {
    /// Wiener process on the grid `k/N`, `k = 1..=N`.
    Wiener,
    /// Exponential-covariance Gaussian field on a Fibonacci lattice.
    Sphere,
}

#[derive(Clone, Debug)]
pub struct MlmcConfig {
    pub field: MlmcField,
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub leaf_max: usize,
    pub alpha: f64,
    /// Coarse-level samples as a multiple of `N`.
    pub q0_factor: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcRow {
    pub n: usize,
    pub levels: usize,
    pub mean_error: f64,
    pub std_error: f64,
}

/// Sup-norm error of the multilevel mean estimate against the exact zero
/// mean, across replicas.
pub fn mlmc_study(cfg: &MlmcConfig) -> Result<Vec<MlmcRow>> {
    if !(cfg.q0_factor > 0.0) {
        return Err(Error::invalid("q0 factor must be positive"));
    }
    cfg.ns
        .iter()
        .map(|&n| {
            let (sites, dim) = match cfg.field {
                MlmcField::Wiener => (
                    PointSet::line((1..=n).map(|k| k as f64 / n as f64).collect()),
                    1,
                ),
                MlmcField::Sphere => (fibonacci_lattice(n)?, 2),
            };
            let tree = ClusterTree::build(&sites, cfg.leaf_max)?;
            let q0 = ((n as f64 * cfg.q0_factor).round() as usize).max(1);
            let schedule = hoelder_schedule(tree.depth(), cfg.alpha, 1.0, q0, dim)?;
            let errs = (0..cfg.replicas.max(1))
                .map(|r| {
                    let seed = derive_seed(cfg.seed, &[n as u64, r as u64]);
                    let est = match cfg.field {
                        MlmcField::Wiener => {
                            mlmc_mean(&WienerSampler::from_points(&sites)?, &tree, &schedule, seed)?
                        }
                        MlmcField::Sphere => mlmc_mean(
                            &SphereFieldSampler::new(sites.clone())?,
                            &tree,
                            &schedule,
                            seed,
                        )?,
                    };
                    Ok(est
                        .mean()
                        .unwrap()
                        .iter()
                        .map(|v| v.abs())
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean_error, std_error) = mean_std(&errs);
            Ok(MlmcRow {
                n,
                levels: tree.depth() + 1,
                mean_error,
                std_error,
            })
        })
        .collect()
}

/// Whether sorted samples in `[0, 1]` have fill distance at most `r`, i.e.
/// every point of `[0, 1]` lies within `r` of a sample.
pub fn covers_unit_interval(xs_sorted: &[f64], r: f64) -> bool {
    match (xs_sorted.first(), xs_sorted.last()) {
        (Some(&a), Some(&b)) => {
            a <= r && b >= 1.0 - r && xs_sorted.windows(2).all(|w| w[1] - w[0] <= 2.0 * r)
        }
        _ => false,
    }
}

/// Fraction of `trials` samples of size `n` for which
/// [`covers_unit_interval`] holds.
pub fn empirical_cover_frequency(n: usize, r: f64, trials: usize, seed: u64) -> f64 {
    let hits: usize = par::map_range(trials, |k| {
        let mut rng = rng_for(seed, &[n as u64, k as u64]);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(f64::total_cmp);
        usize::from(covers_unit_interval(&xs, r))
    })
    .into_iter()
    .sum();
    hits as f64 / trials as f64
}
