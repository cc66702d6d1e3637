//! Monte Carlo, multilevel Monte Carlo means and multi-index Monte Carlo
//! correlations over nested tree partitions.
//!
//! Level `j` works on the cells of the cluster tree at depth `j` with nested
//! anchors, so the detail `(I_j - I_{j-1}) Y` on a cell only needs the field
//! at the level-`j` anchors. Level `j` draws `Q_j` fresh samples; the
//! schedule is indexed by level and the coarse level gets the most samples.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datagen::{cholesky_with_jitter, derive_seed, rng_for, wiener_into, CovarianceKind};
use crate::error::{Error, Result};
use crate::interpolation::NodeAnchors;
use crate::metric::{Metric, PointSet, DEFAULT_DENSE_CAP};
use crate::modulus::RhoClass;
use crate::par;
use crate::spatial::ClusterTree;

/// Samples per chunk of the ordered reduction; fixed so sums do not depend
/// on the worker count.
const CHUNK: usize = 64;

const TAG_ANCHORS: u64 = 0xA1;
const TAG_MC: u64 = 0xB2;
const TAG_ML: u64 = 0xC3;
const TAG_MI: u64 = 0xD4;

/// Per-level sample counts `Q_0 >= Q_1 >= … >= Q_J >= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSchedule {
    q: Vec<usize>,
}

impl SampleSchedule {
    pub fn new(q: Vec<usize>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("schedule needs at least one level"));
        }
        if q.contains(&0) {
            return Err(Error::invalid("sample counts must be positive"));
        }
        if q.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid(
                "sample counts must be nonincreasing in the level",
            ));
        }
        Ok(SampleSchedule { q })
    }

    /// Finest level `J`.
    pub fn finest(&self) -> usize {
        self.q.len() - 1
    }

    /// Samples used at level `j`.
    pub fn at(&self, level: usize) -> usize {
        self.q[level]
    }

    pub fn counts(&self) -> &[usize] {
        &self.q
    }
}

/// `Q_ℓ = max(1, round(Q0 · 2^{-c_uni (α + dim)/2 · ℓ}))` for `ℓ = 0..=J`;
/// `dim` is the cost exponent (1 for curves, 2 for surfaces).
pub fn hoelder_schedule(
    finest: usize,
    alpha: f64,
    c_uni: f64,
    q0: usize,
    dim: u32,
) -> Result<SampleSchedule> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} not in (0, 1]")));
    }
    if !(c_uni > 0.0) || q0 == 0 || dim == 0 {
        return Err(Error::invalid("c_uni, Q0 and dim must be positive"));
    }
    let factor = schedule_factor(alpha, c_uni, dim);
    let q = (0..=finest)
        .map(|l| ((q0 as f64 * factor.powi(l as i32)).round() as usize).max(1))
        .collect();
    SampleSchedule::new(q)
}

/// Per-level ratio `Q_ℓ / Q_{ℓ-1}` used by [`hoelder_schedule`].
pub fn schedule_factor(alpha: f64, c_uni: f64, dim: u32) -> f64 {
    2f64.powf(-c_uni * (alpha + f64::from(dim)) / 2.0)
}

fn scale(rho: &RhoClass, c_diam: f64, c_uni: f64, k: f64) -> f64 {
    rho.eval(c_diam * 2f64.powf(-c_uni * k))
}

/// `σ_ML = ρ(c 2^{-u J}) + 2 Σ_j ρ(c 2^{-u(j-1)}) / √Q_j`.
pub fn convergence_factor_ml(rho: &RhoClass, q: &SampleSchedule, c_diam: f64, c_uni: f64) -> f64 {
    let j_max = q.finest();
    let bias = scale(rho, c_diam, c_uni, j_max as f64);
    let sampling: f64 = (0..=j_max)
        .map(|j| scale(rho, c_diam, c_uni, j as f64 - 1.0) / (q.at(j) as f64).sqrt())
        .sum();
    bias + 2.0 * sampling
}

/// `Σ_{k+k'=j} ρ(c 2^{-u(k-1)}) ρ(c 2^{-u(k'-1)})`.
pub fn mi_level_term(rho: &RhoClass, j: usize, c_diam: f64, c_uni: f64) -> f64 {
    (0..=j)
        .map(|k| {
            scale(rho, c_diam, c_uni, k as f64 - 1.0)
                * scale(rho, c_diam, c_uni, (j - k) as f64 - 1.0)
        })
        .sum()
}

/// `σ_MI = 2ρ(c 2^{-u J}) + 4 Σ_j Σ_{k+k'=j} ρ(c 2^{-u(k-1)}) ρ(c 2^{-u(k'-1)}) / √Q_j`.
pub fn convergence_factor_mi(rho: &RhoClass, q: &SampleSchedule, c_diam: f64, c_uni: f64) -> f64 {
    let j_max = q.finest();
    let bias = scale(rho, c_diam, c_uni, j_max as f64);
    let sampling: f64 = (0..=j_max)
        .map(|j| mi_level_term(rho, j, c_diam, c_uni) / (q.at(j) as f64).sqrt())
        .sum();
    2.0 * bias + 4.0 * sampling
}

/// Scalar random field that can be sampled jointly at any subset of sites.
pub trait FieldSampler: Sync {
    /// Precomputed state for one fixed list of sites.
    type Plan: Send + Sync;

    fn num_sites(&self) -> usize;

    fn plan(&self, sites: &[usize]) -> Result<Self::Plan>;

    /// One joint draw at the plan's sites, in the order they were given.
    fn draw(&self, plan: &Self::Plan, rng: &mut ChaCha8Rng, out: &mut Vec<f64>);
}

/// Wiener process at nonnegative times.
#[derive(Clone, Debug)]
pub struct WienerSampler {
    times: Vec<f64>,
}

impl WienerSampler {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::invalid(
                "Wiener times must be finite and nonnegative",
            ));
        }
        Ok(WienerSampler { times })
    }

    pub fn from_points(ps: &PointSet) -> Result<Self> {
        let xs = ps.as_line().ok_or(Error::DimensionMismatch {
            expected: 1,
            got: ps.dim(),
        })?;
        Self::new(xs.to_vec())
    }
}

pub struct WienerPlan {
    sorted: Vec<f64>,
    slot: Vec<usize>,
}

impl FieldSampler for WienerSampler {
    type Plan = WienerPlan;

    fn num_sites(&self) -> usize {
        self.times.len()
    }

    fn plan(&self, sites: &[usize]) -> Result<WienerPlan> {
        let mut ts: Vec<f64> = sites
            .iter()
            .map(|&i| {
                self.times.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.times.len(),
                })
            })
            .collect::<Result<_>>()?;
        let req = ts.clone();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let slot = req.iter().map(|t| ts.partition_point(|s| s < t)).collect();
        Ok(WienerPlan { sorted: ts, slot })
    }

    fn draw(&self, plan: &WienerPlan, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let mut path = Vec::with_capacity(plan.sorted.len());
        wiener_into(&plan.sorted, rng, &mut path);
        out.clear();
        out.extend(plan.slot.iter().map(|&s| path[s]));
    }
}

/// Centred Gaussian field on the sphere with covariance `exp(-4 d(x, y))`,
/// factorized per plan.
#[derive(Clone, Debug)]
pub struct SphereFieldSampler {
    sites: PointSet,
    cap: usize,
}

impl SphereFieldSampler {
    pub fn new(sites: PointSet) -> Result<Self> {
        if !matches!(sites.metric(), Metric::GreatCircle) {
            return Err(Error::invalid("sphere field needs great-circle sites"));
        }
        Ok(SphereFieldSampler {
            sites,
            cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

pub struct DensePlan {
    factor: DMatrix<f64>,
    jitter: f64,
}

impl DensePlan {
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

impl FieldSampler for SphereFieldSampler {
    type Plan = DensePlan;

    fn num_sites(&self) -> usize {
        self.sites.len()
    }

    fn plan(&self, sites: &[usize]) -> Result<DensePlan> {
        if sites.len() > self.cap {
            return Err(Error::invalid(format!(
                "{} sites exceed the dense factorization cap {}",
                sites.len(),
                self.cap
            )));
        }
        if let Some(&i) = sites.iter().find(|&&i| i >= self.sites.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.sites.len(),
            });
        }
        let sub = self.sites.subset(sites);
        let n = sites.len();
        let k = DMatrix::from_fn(n, n, |a, b| {
            CovarianceKind::SphereExponential.eval(&sub, a, b)
        });
        let (factor, jitter) = cholesky_with_jitter(&k)?;
        Ok(DensePlan { factor, jitter })
    }

    fn draw(&self, plan: &DensePlan, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let n = plan.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        out.clear();
        out.extend((&plan.factor * z).iter());
    }
}

/// Zero-variance field returning fixed values.
#[derive(Clone, Debug)]
pub struct DeterministicSampler {
    values: Vec<f64>,
}

impl DeterministicSampler {
    pub fn new(values: Vec<f64>) -> Self {
        DeterministicSampler { values }
    }
}

impl FieldSampler for DeterministicSampler {
    type Plan = Vec<usize>;

    fn num_sites(&self) -> usize {
        self.values.len()
    }

    fn plan(&self, sites: &[usize]) -> Result<Vec<usize>> {
        if let Some(&i) = sites.iter().find(|&&i| i >= self.values.len()) {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.values.len(),
            });
        }
        Ok(sites.to_vec())
    }

    fn draw(&self, plan: &Vec<usize>, _rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        out.extend(plan.iter().map(|&i| self.values[i]));
    }
}

/// Kind of estimate held by an [`EstimatorResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Mean,
    Correlation,
}

#[derive(Clone, Debug)]
enum Estimate {
    Mean(Vec<f64>),
    Correlation(SparseCorrelation),
}

/// Output of the estimators.
#[derive(Clone, Debug)]
pub struct EstimatorResult {
    estimate: Estimate,
    /// Samples drawn at each level (a single entry for plain MC).
    pub samples_per_level: Vec<usize>,
}

impl EstimatorResult {
    pub fn kind(&self) -> EstimatorKind {
        match self.estimate {
            Estimate::Mean(_) => EstimatorKind::Mean,
            Estimate::Correlation(_) => EstimatorKind::Correlation,
        }
    }

    /// Per-site mean, for mean estimates.
    pub fn mean(&self) -> Option<&[f64]> {
        match &self.estimate {
            Estimate::Mean(v) => Some(v),
            Estimate::Correlation(_) => None,
        }
    }

    pub fn correlation(&self) -> Option<&SparseCorrelation> {
        match &self.estimate {
            Estimate::Correlation(c) => Some(c),
            Estimate::Mean(_) => None,
        }
    }

    /// CSV `site_index,value` of a mean estimate.
    pub fn mean_csv(&self) -> Option<String> {
        let v = self.mean()?;
        let mut s = String::from("site_index,value\n");
        for (i, x) in v.iter().enumerate() {
            let _ = writeln!(s, "{i},{x:?}");
        }
        Some(s)
    }

    /// CSV `i,j,value` of correlation entries at the given probes.
    pub fn probes_csv(&self, probes: &[(usize, usize)]) -> Result<String> {
        let c = self
            .correlation()
            .ok_or_else(|| Error::invalid("not a correlation estimate"))?;
        let mut s = String::from("i,j,value\n");
        for &(i, j) in probes {
            let _ = writeln!(s, "{i},{j},{:?}", c.entry(i, j)?);
        }
        Ok(s)
    }
}

/// Plain Monte Carlo mean of `q` independent draws at every site.
pub fn mc_mean<S: FieldSampler>(sampler: &S, q: usize, seed: u64) -> Result<EstimatorResult> {
    if q == 0 {
        return Err(Error::invalid("Q must be at least 1"));
    }
    let n = sampler.num_sites();
    let all: Vec<usize> = (0..n).collect();
    let plan = sampler.plan(&all)?;
    let sum = chunked_sum(q, n, |k, acc, buf| {
        sampler.draw(&plan, &mut rng_for(seed, &[TAG_MC, k as u64]), buf);
        for (a, y) in acc.iter_mut().zip(buf.iter()) {
            *a += y;
        }
    });
    Ok(EstimatorResult {
        estimate: Estimate::Mean(sum.into_iter().map(|s| s / q as f64).collect()),
        samples_per_level: vec![q],
    })
}

/// Ordered sum over `q` samples of `width`-vectors produced by `add`.
fn chunked_sum<F>(q: usize, width: usize, add: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut Vec<f64>) + Sync + Send,
{
    let chunks = q.div_ceil(CHUNK);
    let partial = par::map_range(chunks, |c| {
        let mut acc = vec![0.0; width];
        let mut buf = Vec::new();
        for k in c * CHUNK..((c + 1) * CHUNK).min(q) {
            add(k, &mut acc, &mut buf);
        }
        acc
    });
    let mut total = vec![0.0; width];
    for p in partial {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

/// Cells, nested anchors and detail bookkeeping for levels `0..=J`.
#[derive(Clone, Debug)]
pub struct LevelHierarchy {
    /// Node ids of the cells at each level.
    cells: Vec<Vec<usize>>,
    /// Site anchor of every cell at each level.
    anchors: Vec<Vec<usize>>,
    /// For each level-`j` cell, the position of the enclosing level-`j-1`
    /// cell (unused at level 0).
    coarse: Vec<Vec<usize>>,
    /// For each level-`j` cell, the position of its coarse anchor within
    /// the level-`j` anchor list.
    coarse_slot: Vec<Vec<usize>>,
    /// Cell position of every site at each level.
    cell_of: Vec<Vec<u32>>,
}

impl LevelHierarchy {
    /// Uses nested anchors drawn from `seed`.
    pub fn new(tree: &ClusterTree, finest: usize, seed: u64) -> Result<Self> {
        let anchors = NodeAnchors::random(tree, derive_seed(seed, &[TAG_ANCHORS]));
        Self::with_anchors(tree, finest, &anchors)
    }

    pub fn with_anchors(tree: &ClusterTree, finest: usize, na: &NodeAnchors) -> Result<Self> {
        if finest > tree.depth() {
            return Err(Error::invalid(format!(
                "finest level {finest} exceeds tree depth {}",
                tree.depth()
            )));
        }
        let n = tree.len();
        let mut cells = Vec::new();
        let mut anchors = Vec::new();
        let mut coarse = Vec::new();
        let mut coarse_slot = Vec::new();
        let mut cell_of = Vec::new();
        let mut pos_of_node = vec![usize::MAX; tree.nodes().len()];
        for j in 0..=finest {
            let level_cells = tree.level_cells(j);
            let mut prev_pos = vec![usize::MAX; tree.nodes().len()];
            std::mem::swap(&mut prev_pos, &mut pos_of_node);
            let mut owner = vec![0u32; n];
            for (c, &id) in level_cells.iter().enumerate() {
                pos_of_node[id] = c;
                for &i in tree.indices(id) {
                    owner[i] = c as u32;
                }
            }
            let anc: Vec<usize> = level_cells.iter().map(|&id| na.of(id)).collect();
            let (co, slot) = if j == 0 {
                (vec![0; level_cells.len()], vec![0; level_cells.len()])
            } else {
                let co: Vec<usize> = level_cells
                    .iter()
                    .map(|&id| {
                        let node = tree.node(id);
                        let up = match node.parent {
                            Some(p) if node.level == j => p,
                            _ => id,
                        };
                        prev_pos[up]
                    })
                    .collect();
                let prev_anchors: &Vec<usize> = &anchors[j - 1];
                let slot = co
                    .iter()
                    .map(|&p| {
                        let a = prev_anchors[p];
                        pos_of_node_anchor(&anc, &owner, a)
                    })
                    .collect();
                (co, slot)
            };
            cells.push(level_cells);
            anchors.push(anc);
            coarse.push(co);
            coarse_slot.push(slot);
            cell_of.push(owner);
        }
        Ok(LevelHierarchy {
            cells,
            anchors,
            coarse,
            coarse_slot,
            cell_of,
        })
    }

    pub fn finest(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn num_cells(&self, level: usize) -> usize {
        self.cells[level].len()
    }

    pub fn anchors(&self, level: usize) -> &[usize] {
        &self.anchors[level]
    }

    pub fn cell_of(&self, level: usize, site: usize) -> usize {
        self.cell_of[level][site] as usize
    }

    /// Detail `(I_j - I_{j-1}) Y` per level-`j` cell from field values at
    /// the level-`j` anchors.
    fn detail(&self, level: usize, at_anchors: &[f64], out: &mut [f64]) {
        if level == 0 {
            out.copy_from_slice(at_anchors);
            return;
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o = at_anchors[c] - at_anchors[self.coarse_slot[level][c]];
        }
    }

    /// `I_J y` at every site from values at all sites.
    pub fn interpolate_finest(&self, y: &[f64]) -> Vec<f64> {
        let j = self.finest();
        let owner = &self.cell_of[j];
        owner
            .iter()
            .map(|&c| y[self.anchors[j][c as usize]])
            .collect()
    }

    /// Sum of per-level cell contributions, propagated from coarse to fine.
    fn accumulate(&self, per_level: &[Vec<f64>]) -> Vec<f64> {
        let mut cum = per_level[0].clone();
        for j in 1..=self.finest() {
            cum = (0..self.num_cells(j))
                .map(|c| cum[self.coarse[j][c]] + per_level[j][c])
                .collect();
        }
        let owner = &self.cell_of[self.finest()];
        owner.iter().map(|&c| cum[c as usize]).collect()
    }
}

/// Position of anchor site `a` in the level anchor list; nested anchors
/// guarantee it is the anchor of its own cell.
fn pos_of_node_anchor(anchors: &[usize], owner: &[u32], a: usize) -> usize {
    let c = owner[a] as usize;
    debug_assert_eq!(anchors[c], a);
    c
}

/// How levels draw their samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    /// Fresh independent samples per level.
    Independent,
    /// One full-field sample per index shared by all levels; the telescoping
    /// sum then collapses to the finest interpolant. For verification only.
    Shared,
}

/// Multilevel Monte Carlo estimate of the mean field.
pub fn mlmc_mean<S: FieldSampler>(
    sampler: &S,
    tree: &ClusterTree,
    schedule: &SampleSchedule,
    seed: u64,
) -> Result<EstimatorResult> {
    let h = LevelHierarchy::new(tree, schedule.finest(), seed)?;
    mlmc_mean_on(sampler, &h, schedule, seed, SampleMode::Independent)
}

/// [`mlmc_mean`] on a prepared hierarchy.
pub fn mlmc_mean_on<S: FieldSampler>(
    sampler: &S,
    h: &LevelHierarchy,
    schedule: &SampleSchedule,
    seed: u64,
    mode: SampleMode,
) -> Result<EstimatorResult> {
    check_sizes(sampler, h, schedule)?;
    let all: Vec<usize> = (0..sampler.num_sites()).collect();
    let mut per_level = Vec::with_capacity(h.finest() + 1);
    for j in 0..=h.finest() {
        let anchors = h.anchors(j);
        let plan = match mode {
            SampleMode::Independent => sampler.plan(anchors)?,
            SampleMode::Shared => sampler.plan(&all)?,
        };
        let m = h.num_cells(j);
        let q = schedule.at(j);
        let sum = chunked_sum(q, m, |k, acc, buf| {
            let mut d = vec![0.0; m];
            match mode {
                SampleMode::Independent => {
                    sampler.draw(
                        &plan,
                        &mut rng_for(seed, &[TAG_ML, j as u64, k as u64]),
                        buf,
                    );
                    h.detail(j, buf, &mut d);
                }
                SampleMode::Shared => {
                    sampler.draw(
                        &plan,
                        &mut rng_for(seed, &[TAG_ML, u64::MAX, k as u64]),
                        buf,
                    );
                    let at: Vec<f64> = anchors.iter().map(|&a| buf[a]).collect();
                    h.detail(j, &at, &mut d);
                }
            }
            for (a, x) in acc.iter_mut().zip(d) {
                *a += x;
            }
        });
        per_level.push(sum.into_iter().map(|s| s / q as f64).collect::<Vec<_>>());
    }
    Ok(EstimatorResult {
        estimate: Estimate::Mean(h.accumulate(&per_level)),
        samples_per_level: schedule.counts().to_vec(),
    })
}

fn check_sizes<S: FieldSampler>(
    sampler: &S,
    h: &LevelHierarchy,
    schedule: &SampleSchedule,
) -> Result<()> {
    if schedule.finest() != h.finest() {
        return Err(Error::invalid(format!(
            "schedule has finest level {} but the hierarchy has {}",
            schedule.finest(),
            h.finest()
        )));
    }
    if sampler.num_sites() != h.cell_of[0].len() {
        return Err(Error::SizeMismatch {
            sites: h.cell_of[0].len(),
            values: sampler.num_sites(),
        });
    }
    Ok(())
}

/// Sparse level-pair representation of a multi-index correlation estimate.
/// Index `j` holds, for each of its `Q_j` samples, the details of levels
/// `0..=j` per cell, stored sample-major.
#[derive(Clone, Debug)]
pub struct SparseCorrelation {
    hierarchy: LevelHierarchy,
    q: Vec<usize>,
    /// `details[j][k]` is a `Q_j × M_k` row-major block.
    details: Vec<Vec<Vec<f64>>>,
    n: usize,
}

impl SparseCorrelation {
    pub fn num_sites(&self) -> usize {
        self.n
    }

    /// Estimated `E[Y(x_s) Y(x_t)]`; symmetric bit for bit.
    pub fn entry(&self, s: usize, t: usize) -> Result<f64> {
        if s >= self.n || t >= self.n {
            return Err(Error::IndexOutOfRange {
                index: s.max(t),
                len: self.n,
            });
        }
        let (s, t) = (s.min(t), s.max(t));
        let h = &self.hierarchy;
        let mut total = 0.0;
        for (j, blocks) in self.details.iter().enumerate() {
            let q = self.q[j];
            let cs: Vec<usize> = (0..=j).map(|k| h.cell_of(k, s)).collect();
            let ct: Vec<usize> = (0..=j).map(|k| h.cell_of(k, t)).collect();
            let mut sum = 0.0;
            for sample in 0..q {
                for k in 0..=j {
                    let kp = j - k;
                    let m_k = h.num_cells(k);
                    let m_kp = h.num_cells(kp);
                    sum += blocks[k][sample * m_k + cs[k]] * blocks[kp][sample * m_kp + ct[kp]];
                }
            }
            total += sum / q as f64;
        }
        Ok(total)
    }
}

/// Multi-index (sparse tensor) Monte Carlo estimate of `E[Y ⊗ Y]`.
pub fn mimc_correlation<S: FieldSampler>(
    sampler: &S,
    tree: &ClusterTree,
    schedule: &SampleSchedule,
    seed: u64,
) -> Result<EstimatorResult> {
    let h = LevelHierarchy::new(tree, schedule.finest(), seed)?;
    mimc_correlation_on(sampler, h, schedule, seed)
}

/// [`mimc_correlation`] on a prepared hierarchy.
pub fn mimc_correlation_on<S: FieldSampler>(
    sampler: &S,
    h: LevelHierarchy,
    schedule: &SampleSchedule,
    seed: u64,
) -> Result<EstimatorResult> {
    check_sizes(sampler, &h, schedule)?;
    let mut details = Vec::with_capacity(h.finest() + 1);
    for j in 0..=h.finest() {
        // anchors of coarser levels are level-j anchors too
        let plan = sampler.plan(h.anchors(j))?;
        let q = schedule.at(j);
        let samples: Vec<Vec<Vec<f64>>> = par::map_range(q, |k| {
            let mut buf = Vec::new();
            sampler.draw(
                &plan,
                &mut rng_for(seed, &[TAG_MI, j as u64, k as u64]),
                &mut buf,
            );
            level_details(&h, j, &buf)
        });
        let mut blocks: Vec<Vec<f64>> = (0..=j)
            .map(|k| Vec::with_capacity(q * h.num_cells(k)))
            .collect();
        for s in samples {
            for (k, d) in s.into_iter().enumerate() {
                blocks[k].extend(d);
            }
        }
        details.push(blocks);
    }
    let n = h.cell_of[0].len();
    Ok(EstimatorResult {
        estimate: Estimate::Correlation(SparseCorrelation {
            hierarchy: h,
            q: schedule.counts().to_vec(),
            details,
            n,
        }),
        samples_per_level: schedule.counts().to_vec(),
    })
}

/// Details of levels `0..=j` from field values at the level-`j` anchors.
fn level_details(h: &LevelHierarchy, j: usize, at_j: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); j + 1];
    let mut vals = at_j.to_vec();
    for k in (0..=j).rev() {
        let mut d = vec![0.0; h.num_cells(k)];
        h.detail(k, &vals, &mut d);
        out[k] = d;
        if k > 0 {
            // values at level k-1 anchors, read off the level-k anchors
            vals = (0..h.num_cells(k - 1))
                .map(|p| {
                    let a = h.anchors[k - 1][p];
                    vals[h.cell_of(k, a)]
                })
                .collect();
        }
    }
    out
}
