//! Synthetic data: Wiener paths, Gaussian fields on the sphere, Fibonacci
//! lattices, the non-Hölder sphere function, and time-series ingestion.
//!
//! All randomness is drawn from `ChaCha8Rng`, seeded through
//! [`derive_seed`], so streams are reproducible across platforms and
//! independent of thread count.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metric::{LabeledDataset, Metric, PointSet, DEFAULT_DENSE_CAP};

/// Jitter multipliers of the mean diagonal tried in turn.
const JITTERS: [f64; 6] = [0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the substream addressed by `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15));
    for &p in path {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

/// Generator for the substream addressed by `path` under `master`.
pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// `n` points on the unit sphere along the golden-angle spiral.
pub fn fibonacci_lattice(n: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut coords = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let rad = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        let p = [rad * phi.cos(), rad * phi.sin(), z];
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        coords.extend(p.iter().map(|c| c / norm));
    }
    PointSet::from_flat(3, coords, Metric::GreatCircle)
}

/// Uniformly random points on the unit sphere.
pub fn random_sphere_points<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PointSet> {
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        loop {
            let p: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if norm > 1e-12 {
                coords.extend(p.iter().map(|c| c / norm));
                break;
            }
        }
    }
    PointSet::from_flat(3, coords, Metric::GreatCircle)
}

/// `n` equispaced points on `[0, 1]`, endpoints included (`n >= 2`).
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect())
}

/// `n` sorted iid uniform points on `[0, 1)`.
pub fn iid_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

/// `n` sorted iid uniform points on `(0, 1]`, suitable as Wiener times.
pub fn iid_times<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    xs
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(&t) = times.first() {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!(
                "Wiener times must be positive, got {t}"
            )));
        }
    }
    if let Some(k) = times
        .windows(2)
        .position(|w| !(w[0] < w[1]) || !w[1].is_finite())
    {
        return Err(Error::invalid(format!(
            "Wiener times must be strictly increasing (position {})",
            k + 1
        )));
    }
    Ok(())
}

/// Wiener path at strictly increasing positive times, drawn from `rng`.
pub fn sample_wiener_with<R: Rng + ?Sized>(times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_times(times)?;
    let mut out = Vec::with_capacity(times.len());
    wiener_into(times, rng, &mut out);
    Ok(out)
}

/// Exact increments; `times` must already be validated.
pub(crate) fn wiener_into<R: Rng + ?Sized>(times: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    let mut w = 0.0;
    let mut prev = 0.0;
    for &t in times {
        let z: f64 = rng.sample(StandardNormal);
        w += (t - prev).sqrt() * z;
        prev = t;
        out.push(w);
    }
}

/// Wiener path at strictly increasing positive times.
pub fn sample_wiener(times: &[f64], seed: u64) -> Result<Vec<f64>> {
    sample_wiener_with(times, &mut rng_for(seed, &[]))
}

/// Covariance kernels available for dense Gaussian sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceKind {
    /// `min(s, t)` on 1-D positive sites.
    Wiener,
    /// `exp(-4 d(x, y))` with `d` the great-circle distance.
    SphereExponential,
}

impl CovarianceKind {
    pub fn eval(self, ps: &PointSet, i: usize, j: usize) -> f64 {
        match self {
            CovarianceKind::Wiener => ps.point(i)[0].min(ps.point(j)[0]),
            CovarianceKind::SphereExponential => (-4.0 * ps.dist(i, j)).exp(),
        }
    }

    fn check(self, ps: &PointSet) -> Result<()> {
        match self {
            CovarianceKind::Wiener if ps.dim() != 1 => Err(Error::DimensionMismatch {
                expected: 1,
                got: ps.dim(),
            }),
            CovarianceKind::SphereExponential if !matches!(ps.metric(), Metric::GreatCircle) => {
                Err(Error::invalid("sphere covariance needs great-circle sites"))
            }
            _ => Ok(()),
        }
    }
}

/// Lower Cholesky factor of `k`, retrying with growing diagonal jitter.
/// Returns the factor and the jitter multiplier that succeeded.
pub fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let mean_diag = if n == 0 { 0.0 } else { k.trace() / n as f64 };
    let mut last = 0.0;
    for &jitter in &JITTERS {
        last = jitter;
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += jitter * mean_diag;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.l(), jitter));
        }
    }
    Err(Error::Factorization { jitter: last })
}

/// Gaussian field with a dense covariance factorized once.
#[derive(Clone, Debug)]
pub struct GaussianFieldSpec {
    pub kind: CovarianceKind,
    pub sites: PointSet,
    factor: DMatrix<f64>,
    jitter: f64,
}

impl GaussianFieldSpec {
    /// Factorizes the covariance on `sites`; refuses more than `cap` sites.
    pub fn new(kind: CovarianceKind, sites: PointSet, cap: usize) -> Result<Self> {
        kind.check(&sites)?;
        if sites.len() > cap {
            return Err(Error::invalid(format!(
                "{} sites exceed the dense factorization cap {cap}",
                sites.len()
            )));
        }
        let n = sites.len();
        let k = DMatrix::from_fn(n, n, |i, j| kind.eval(&sites, i, j));
        let (factor, jitter) = cholesky_with_jitter(&k)?;
        Ok(GaussianFieldSpec {
            kind,
            sites,
            factor,
            jitter,
        })
    }

    pub fn with_default_cap(kind: CovarianceKind, sites: PointSet) -> Result<Self> {
        Self::new(kind, sites, DEFAULT_DENSE_CAP)
    }

    /// Jitter multiplier (of the mean diagonal) that was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `max |L Lᵀ - K| / max |K|`.
    pub fn residual(&self) -> f64 {
        let n = self.sites.len();
        let llt = &self.factor * self.factor.transpose();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let k = self.kind.eval(&self.sites, i, j);
                num = num.max((llt[(i, j)] - k).abs());
                den = den.max(k.abs());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.sites.len();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        self.sample_with(&mut rng_for(seed, &[]))
    }
}

/// Sample of a [`GaussianFieldSpec`] for the given seed.
pub fn sample_sphere_field(spec: &GaussianFieldSpec, seed: u64) -> Vec<f64> {
    spec.sample(seed)
}

/// `f(x) = |log(d(x, x0)/π) - 2|^{-1}` with `f(x0) = 0`: continuous on the
/// sphere but not Hölder continuous at `x0`.
pub fn nonhoelder_sphere(ps: &PointSet, x0: &[f64]) -> Result<LabeledDataset> {
    if !matches!(ps.metric(), Metric::GreatCircle) {
        return Err(Error::invalid(
            "non-Hölder function needs great-circle sites",
        ));
    }
    if x0.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x0.len(),
        });
    }
    let norm = x0.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > crate::metric::SPHERE_NORM_TOL {
        return Err(Error::NotOnSphere { index: 0, norm });
    }
    let ys = (0..ps.len())
        .map(|i| {
            let d = ps.dist_to(x0, i);
            if d <= 0.0 {
                0.0
            } else {
                1.0 / ((d / PI).ln() - 2.0).abs()
            }
        })
        .collect();
    LabeledDataset::scalar(ps.clone(), ys)
}

/// Result of [`load_timeseries`].
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub dataset: LabeledDataset,
    /// Rows dropped for non-numeric or non-finite entries (header excluded).
    pub skipped: usize,
}

/// Reads a two-column `time,value` CSV. A non-numeric first row is taken
/// as a header; later non-numeric rows are skipped and counted.
pub fn load_timeseries(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_timeseries(&text).map_err(|e| match e {
        Error::InvalidParameter(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

fn parse_timeseries(text: &str) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut skipped = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
        };
        match (num(0), num(1)) {
            (Some(t), Some(y)) => {
                ts.push(t);
                ys.push(y);
            }
            _ if row == 0 => {}
            _ => skipped += 1,
        }
    }
    if ts.is_empty() {
        return Err(Error::invalid("no numeric time,value rows"));
    }
    Ok(TimeSeries {
        dataset: LabeledDataset::scalar(PointSet::line(ts), ys)?,
        skipped,
    })
}

/// Writes sites and values as CSV with columns `x0..,y0..`, preceded by
/// optional `#` comment lines.
pub fn write_dataset_csv(ds: &LabeledDataset, comments: &[String], path: &Path) -> Result<()> {
    let mut s = String::new();
    for c in comments {
        s.push_str("# ");
        s.push_str(c);
        s.push('\n');
    }
    let dx = ds.sites.dim();
    let dy = ds.values.dim();
    let header: Vec<String> = (0..dx)
        .map(|k| format!("x{k}"))
        .chain((0..dy).map(|k| format!("y{k}")))
        .collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for i in 0..ds.len() {
        let row: Vec<String> = ds
            .sites
            .point(i)
            .iter()
            .chain(ds.values.point(i))
            .map(|v| format!("{v:?}"))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_dataset_csv`]; the header decides how many
/// columns are sites (`x*`) and values (`y*`). Values use the absolute or
/// Euclidean metric depending on their dimension.
pub fn read_dataset_csv(path: &Path, site_metric: Metric) -> Result<LabeledDataset> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    let dx = header.iter().filter(|h| h.starts_with('x')).count();
    let dy = header.iter().filter(|h| h.starts_with('y')).count();
    if dx == 0 || dy == 0 || dx + dy != header.len() {
        return Err(bad(format!("expected x*,y* columns, got {header:?}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", row + 1)))?;
            if k < dx {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let value_metric = if dy == 1 {
        Metric::Absolute
    } else {
        Metric::Euclidean
    };
    LabeledDataset::new(
        PointSet::from_flat(dx, xs, site_metric)?,
        PointSet::from_flat(dy, ys, value_metric)?,
    )
}
