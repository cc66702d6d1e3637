//! Coarsened multilevel evaluation of the discrete modulus.
//!
//! The offline phase builds nested site sets `X_{N_0} ⊇ X_{N_1} ⊇ … ⊇ X_{N_K}`
//! by repeated greedy covering with radii `R^k r` and stores the level values
//! `ω_{N_k}(Y_{N_k}, R^k r)`. The online phase evaluates `t ≤ r` exactly and
//! otherwise works on the coarse set whose radius bracket contains `t`.

use std::fmt::Write as _;
use std::path::Path;

use crate::covering::greedy_cover;
use crate::error::{Error, Result};
use crate::metric::LabeledDataset;
use crate::modulus::{
    modulus_at, modulus_at_indexed, modulus_at_many, modulus_at_many_indexed, sort_queries,
};
use crate::spatial::{ClusterTree, DEFAULT_LEAF_MAX};

const MAX_LEVELS: usize = 4096;
const MANIFEST: &str = "manifest.txt";

struct LevelData {
    data: LabeledDataset,
    tree: Option<ClusterTree>,
}

impl LevelData {
    fn new(ds: &LabeledDataset, sites: &[usize]) -> Self {
        let data = ds.subset(sites);
        let tree = ClusterTree::build(&data.sites, DEFAULT_LEAF_MAX).ok();
        LevelData { data, tree }
    }

    fn at(&self, t: f64) -> f64 {
        match &self.tree {
            Some(tree) => modulus_at_indexed(&self.data, tree, t),
            None => modulus_at(&self.data, t),
        }
    }

    fn at_many(&self, ts: &[f64]) -> Vec<f64> {
        match &self.tree {
            Some(tree) => modulus_at_many_indexed(&self.data, tree, ts),
            None => modulus_at_many(&self.data, ts),
        }
    }
}

/// Offline product of [`build_sketch`].
pub struct ModulusSketch {
    r: f64,
    growth: f64,
    horizon: f64,
    /// Site sets for levels `0..=K`, as indices into the original dataset.
    sites: Vec<Vec<usize>>,
    /// `ω_{N_k}(Y_{N_k}, R^k r)` for `k = 0..K`.
    level_values: Vec<f64>,
    inject_extremal: bool,
    n: usize,
    cache: Vec<LevelData>,
}

impl std::fmt::Debug for ModulusSketch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModulusSketch")
            .field("r", &self.r)
            .field("R", &self.growth)
            .field("T", &self.horizon)
            .field("K", &self.num_levels())
            .field("level_sizes", &self.level_sizes())
            .field("level_values", &self.level_values)
            .field("inject_extremal", &self.inject_extremal)
            .finish()
    }
}

/// Smallest `k >= 0` with `r R^k >= t`.
fn level_for(r: f64, growth: f64, t: f64) -> usize {
    let mut k = 0;
    while r * growth.powi(k as i32) < t {
        k += 1;
    }
    k
}

fn check_params(r: f64, growth: f64, horizon: f64) -> Result<usize> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("r = {r} must be positive")));
    }
    if !(growth > 1.0 && growth.is_finite()) {
        return Err(Error::invalid(format!("R = {growth} must exceed 1")));
    }
    if !(horizon.is_finite() && r <= horizon) {
        return Err(Error::invalid(format!(
            "r = {r} must not exceed T = {horizon}"
        )));
    }
    // guard the level loop against R extremely close to 1
    if (horizon / r).ln() / growth.ln() > MAX_LEVELS as f64 {
        return Err(Error::invalid("too many sketch levels; increase R"));
    }
    Ok(level_for(r, growth, horizon))
}

fn extremal_pair(ds: &LabeledDataset) -> Result<[usize; 2]> {
    let ys = ds
        .scalar_values()
        .ok_or_else(|| Error::invalid("extremal injection needs one-dimensional values"))?;
    let mut lo = 0;
    let mut hi = 0;
    for (i, &y) in ys.iter().enumerate() {
        if y < ys[lo] {
            lo = i;
        }
        if y > ys[hi] {
            hi = i;
        }
    }
    Ok([lo, hi])
}

/// Offline phase: nested covers and their level values.
pub fn build_sketch(
    ds: &LabeledDataset,
    r: f64,
    growth: f64,
    horizon: f64,
    inject_extremal: bool,
) -> Result<ModulusSketch> {
    let k_levels = check_params(r, growth, horizon)?;
    if ds.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let extremal = if inject_extremal {
        Some(extremal_pair(ds)?)
    } else {
        None
    };
    let mut sites = vec![(0..ds.len()).collect::<Vec<_>>()];
    let mut level_values = Vec::with_capacity(k_levels);
    let mut cache = vec![LevelData::new(ds, &sites[0])];
    for k in 0..k_levels {
        let radius = r * growth.powi(k as i32);
        let level = &cache[k];
        level_values.push(level.at(radius));
        let cover = greedy_cover(&level.data.sites, radius, level.tree.as_ref())?;
        let mut next: Vec<usize> = cover.center_indices.iter().map(|&c| sites[k][c]).collect();
        if let Some(pair) = extremal {
            for e in pair {
                if !next.contains(&e) {
                    next.push(e);
                }
            }
        }
        cache.push(LevelData::new(ds, &next));
        sites.push(next);
    }
    Ok(ModulusSketch {
        r,
        growth,
        horizon,
        sites,
        level_values,
        inject_extremal,
        n: ds.len(),
        cache,
    })
}

impl ModulusSketch {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of precomputed levels `K`.
    pub fn num_levels(&self) -> usize {
        self.level_values.len()
    }

    pub fn level_values(&self) -> &[f64] {
        &self.level_values
    }

    /// Site indices of level `k`, `0 <= k <= K`.
    pub fn level_sites(&self, k: usize) -> &[usize] {
        &self.sites[k]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.sites.iter().map(Vec::len).collect()
    }

    pub fn inject_extremal(&self) -> bool {
        self.inject_extremal
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("t = {t} is negative")));
        }
        if t > self.horizon {
            return Err(Error::Domain(format!(
                "t = {t} exceeds the sketch horizon T = {}",
                self.horizon
            )));
        }
        Ok(())
    }

    fn prefix_max(&self, k: usize) -> f64 {
        self.level_values[..k].iter().copied().fold(0.0, f64::max)
    }

    /// Online phase for one `t ∈ [0, T]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        if t <= self.r {
            return Ok(self.cache[0].at(t));
        }
        let k = level_for(self.r, self.growth, t);
        Ok(self.cache[k].at(t).max(self.prefix_max(k)))
    }

    /// [`eval`](Self::eval) for many queries; queries are grouped by level so
    /// each level's pairs are scanned once. Identical to per-query results.
    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        for &t in ts {
            self.check_t(t)?;
        }
        let (order, sorted) = sort_queries(ts);
        let mut out = vec![0.0; ts.len()];
        let mut start = 0;
        while start < sorted.len() {
            let k = if sorted[start] <= self.r {
                0
            } else {
                level_for(self.r, self.growth, sorted[start])
            };
            let mut end = start + 1;
            while end < sorted.len() && sorted[end] <= self.r * self.growth.powi(k as i32) {
                end += 1;
            }
            let vals = self.cache[k].at_many(&sorted[start..end]);
            let floor = self.prefix_max(k);
            for (q, v) in (start..end).zip(vals) {
                out[order[q]] = v.max(floor);
            }
            start = end;
        }
        Ok(out)
    }

    /// Writes `manifest.txt` plus `level_<k>.csv` (column `site_index`) into
    /// `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut m = String::new();
        let _ = writeln!(m, "r={:?}", self.r);
        let _ = writeln!(m, "R={:?}", self.growth);
        let _ = writeln!(m, "T={:?}", self.horizon);
        let _ = writeln!(m, "K={}", self.num_levels());
        let _ = writeln!(m, "n_sites={}", self.n);
        let _ = writeln!(m, "inject_extremal={}", self.inject_extremal);
        for (k, v) in self.level_values.iter().enumerate() {
            let _ = writeln!(m, "level_value_{k}={v:?}");
        }
        let path = dir.join(MANIFEST);
        std::fs::write(&path, m).map_err(|e| Error::io(&path, e))?;
        for (k, sites) in self.sites.iter().enumerate() {
            let mut s = String::from("site_index\n");
            for i in sites {
                let _ = writeln!(s, "{i}");
            }
            let path = dir.join(format!("level_{k}.csv"));
            std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reloads a saved sketch for the dataset it was built from.
    pub fn load(dir: &Path, ds: &LabeledDataset) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let bad = |msg: String| Error::Parse {
            path: path.clone(),
            message: msg,
        };
        let mut kv = std::collections::BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| {
            kv.get(key)
                .cloned()
                .ok_or_else(|| bad(format!("missing key `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| bad(format!("key `{key}` is not a number")))
        };
        let count = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| bad(format!("key `{key}` is not a count")))
        };
        let r = num("r")?;
        let growth = num("R")?;
        let horizon = num("T")?;
        let k_levels = count("K")?;
        if check_params(r, growth, horizon)? != k_levels {
            return Err(bad("K does not match r, R and T".into()));
        }
        let n = count("n_sites")?;
        if n != ds.len() {
            return Err(Error::SizeMismatch {
                sites: ds.len(),
                values: n,
            });
        }
        let inject_extremal = match get("inject_extremal")?.as_str() {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("inject_extremal = {other}"))),
        };
        let level_values = (0..k_levels)
            .map(|k| num(&format!("level_value_{k}")))
            .collect::<Result<Vec<_>>>()?;
        let mut sites = Vec::with_capacity(k_levels + 1);
        for k in 0..=k_levels {
            let p = dir.join(format!("level_{k}.csv"));
            let mut rdr = csv::Reader::from_path(&p)?;
            let mut idx = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                let i: usize = rec
                    .get(0)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: p.clone(),
                        message: format!("bad site index row {rec:?}"),
                    })?;
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
                idx.push(i);
            }
            sites.push(idx);
        }
        let cache = sites.iter().map(|s| LevelData::new(ds, s)).collect();
        Ok(ModulusSketch {
            r,
            growth,
            horizon,
            sites,
            level_values,
            inject_extremal,
            n,
            cache,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Metric, PointSet};
    use crate::modulus::modulus_full;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> LabeledDataset {
        LabeledDataset::scalar(
            PointSet::line((1..=6).map(f64::from).collect()),
            vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0],
        )
        .unwrap()
    }

    fn random_line(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys = xs
            .iter()
            .map(|x| (7.0 * x).sin() + 0.3 * rng.random::<f64>())
            .collect();
        LabeledDataset::scalar(PointSet::line(xs), ys).unwrap()
    }

    #[test]
    fn level_counts() {
        assert_eq!(level_for(1e-5, 2.0, 1.0), 17);
        assert_eq!(level_for(10.0, 2.0, 1e6), 17);
        assert_eq!(level_for(1.0, 2.0, 1.0), 0);
        assert_eq!(level_for(1.0, 2.0, 2.0), 1);
        assert_eq!(level_for(1.0, 2.0, 2.0000001), 2);
    }

    #[test]
    fn r_equal_t_has_no_levels() {
        let s = build_sketch(&fig1(), 6.0, 2.0, 6.0, false).unwrap();
        assert_eq!(s.num_levels(), 0);
        for t in 1..=6 {
            let t = f64::from(t);
            assert_eq!(s.eval(t).unwrap(), modulus_at(&fig1(), t));
        }
        assert_eq!(s.eval(0.0).unwrap(), 0.0);
        assert!(s.eval(6.5).is_err());
    }

    #[test]
    fn parameter_errors() {
        let ds = fig1();
        assert!(build_sketch(&ds, 2.0, 2.0, 1.0, false).is_err());
        assert!(build_sketch(&ds, 1.0, 1.0, 4.0, false).is_err());
        assert!(build_sketch(&ds, 0.0, 2.0, 4.0, false).is_err());
        let planar = LabeledDataset::new(
            PointSet::line(vec![0.0, 1.0]),
            PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]], Metric::Euclidean).unwrap(),
        )
        .unwrap();
        assert!(build_sketch(&planar, 0.5, 2.0, 1.0, true).is_err());
        assert!(build_sketch(&planar, 0.5, 2.0, 1.0, false).is_ok());
    }

    #[test]
    fn levels_are_nested_and_reach_the_global_range() {
        let ds = random_line(500, 3);
        let s = build_sketch(&ds, 1e-3, 2.0, 1.0, true).unwrap();
        assert_eq!(s.num_levels(), 10);
        let sizes = s.level_sizes();
        for k in 1..sizes.len() {
            assert!(sizes[k] <= sizes[k - 1]);
            assert!(s
                .level_sites(k)
                .iter()
                .all(|i| s.level_sites(k - 1).contains(i)));
        }
        let ys = ds.scalar_values().unwrap();
        let [lo, hi] = extremal_pair(&ds).unwrap();
        let range = ys[hi] - ys[lo];
        let d = ds.sites.dist(lo, hi);
        for (k, &v) in s.level_values().iter().enumerate() {
            assert!(v <= range);
            if 1e-3 * 2f64.powi(k as i32) >= d {
                assert_eq!(v, range);
            }
        }
        // level values alone need not be monotone: a coarser level can drop
        // the pair that realized the previous value
        assert!(s.level_values()[2] < s.level_values()[1]);
    }

    #[test]
    fn coverage_error_bound() {
        // eval(t) >= ω_N(t - 2ρ_k) - 2 ω_N(ρ_k), ρ_k the distance from any
        // site to the level-k set
        let xs: Vec<f64> = (0..=800).map(|k| k as f64 / 800.0).collect();
        let ys = xs.iter().map(|x| x.sqrt()).collect();
        let ds = LabeledDataset::scalar(PointSet::line(xs.clone()), ys).unwrap();
        let s = build_sketch(&ds, 1e-3, 2.0, 1.0, false).unwrap();
        let full = modulus_full(&ds);
        for q in 1..=200 {
            let t = q as f64 / 200.0;
            let v = s.eval(t).unwrap();
            assert!(v <= full.eval(t));
            let k = level_for(s.r(), s.growth(), t);
            let rho = (0..ds.len())
                .map(|i| {
                    s.level_sites(k)
                        .iter()
                        .map(|&c| (xs[i] - xs[c]).abs())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            let lower = full.eval((t - 2.0 * rho).max(0.0)) - 2.0 * full.eval(rho);
            assert!(v >= lower - 1e-12, "t={t} v={v} lower={lower}");
        }
    }

    #[test]
    fn save_and_load_reproduce_evaluations() {
        let ds = random_line(300, 9);
        let s = build_sketch(&ds, 1e-3, 2.0, 0.9, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path()).unwrap();
        let back = ModulusSketch::load(dir.path(), &ds).unwrap();
        assert_eq!(back.level_values(), s.level_values());
        assert_eq!(back.level_sizes(), s.level_sizes());
        let ts: Vec<f64> = (0..=90).map(|k| k as f64 / 100.0).collect();
        assert_eq!(back.eval_many(&ts).unwrap(), s.eval_many(&ts).unwrap());
        let other = random_line(299, 9);
        assert!(ModulusSketch::load(dir.path(), &other).is_err());
    }

    proptest! {
        #[test]
        fn exact_below_r_and_lower_bound_above(
            seed in any::<u64>(),
            n in 2usize..120,
            r in 0.005f64..0.2,
            growth in 1.3f64..3.0,
            inject in any::<bool>(),
        ) {
            let ds = random_line(n, seed);
            let s = build_sketch(&ds, r, growth, 1.0, inject).unwrap();
            let full = modulus_full(&ds);
            let ts: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
            let many = s.eval_many(&ts).unwrap();
            prop_assert!(many.windows(2).all(|w| w[0] <= w[1]));
            for (q, &t) in ts.iter().enumerate() {
                let v = s.eval(t).unwrap();
                prop_assert_eq!(v, many[q]);
                if t <= r {
                    prop_assert_eq!(v, modulus_at(&ds, t));
                } else {
                    prop_assert!(v <= full.eval(t));
                }
            }
        }
    }
}
