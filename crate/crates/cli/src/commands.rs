use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use modcont::datagen::{
    derive_seed, fibonacci_lattice, iid_times, iid_uniform, load_timeseries, nonhoelder_sphere,
    read_dataset_csv, rng_for, sample_wiener_with, uniform_grid, write_dataset_csv, CovarianceKind,
    GaussianFieldSpec,
};
use modcont::experiments::{
    consistency_study, graded_grid, interpolation_study, mlmc_study, target_function,
    ConsistencyConfig, MlmcConfig, MlmcField, SiteScheme,
};
use modcont::metric::diameter;
use modcont::{
    build_sketch, greedy_cover, modulus_at_many, AnalyticModulus, ClusterTree, LabeledDataset,
    Metric, PointSet,
};

use crate::config::Config;
use crate::CliError;

/// Keys shared by every subcommand.
const COMMON: &[&str] = &["experiment", "seed", "out", "threads"];
/// Keys that do not enter the config hash.
const UNHASHED: &[&str] = &["seed", "out", "threads"];
const DATA: &[&str] = &[
    "dataset",
    "metric",
    "timeseries",
    "generator",
    "n",
    "sites",
    "x0_index",
];
const GENERATORS: &[&str] = &[
    "wiener",
    "sqrt-1d",
    "log-1d",
    "sphere-field",
    "nonhoelder-sphere",
];

const TAG_GEN: u64 = 0x0067_656e;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Gen,
    Modulus,
    Cover,
    Consistency,
    Interp,
    Mlmc,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Modulus => "modulus",
            Command::Cover => "cover",
            Command::Consistency => "consistency",
            Command::Interp => "interp",
            Command::Mlmc => "mlmc",
        }
    }

    fn keys(self) -> Vec<&'static str> {
        let own: &[&str] = match self {
            Command::Gen => &["output"],
            Command::Modulus => &[
                "exact",
                "r",
                "R",
                "T",
                "inject_extremal",
                "t_grid",
                "t_points",
                "t_max",
            ],
            Command::Cover => &["radius", "leaf_max"],
            Command::Consistency => &["target", "scheme", "ns", "j_max", "replicas", "quad_points"],
            Command::Interp => &["leaf_max", "replicas", "r", "R", "T"],
            Command::Mlmc => &["field", "ns", "replicas", "leaf_max", "alpha", "q0_factor"],
        };
        let data: &[&str] = match self {
            Command::Gen | Command::Modulus | Command::Cover | Command::Interp => DATA,
            Command::Consistency | Command::Mlmc => &[],
        };
        COMMON.iter().chain(data).chain(own).copied().collect()
    }
}

/// Validated context shared by the subcommands.
struct Run<'a> {
    cfg: &'a Config,
    out: PathBuf,
    seed: u64,
    stamp: String,
}

impl Run<'_> {
    fn write(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf, CliError> {
        let mut s = format!("# {}\n{header}\n", self.stamp);
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        self.write_raw(name, &s)
    }

    fn write_raw(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, text)
            .map_err(|e| runtime(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

impl From<modcont::Error> for CliError {
    fn from(e: modcont::Error) -> Self {
        runtime(e)
    }
}

/// Runs `cmd` and returns the files written.
pub fn run(cmd: Command, cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    cfg.check_keys(&cmd.keys())?;
    if let Some(exp) = cfg.raw("experiment") {
        if exp != cmd.name() {
            return Err(CliError::Config(format!(
                "config is for experiment `{exp}`, not `{}`",
                cmd.name()
            )));
        }
    }
    let seed = cfg.get("seed", 0u64)?;
    let out = PathBuf::from(cfg.raw("out").unwrap_or("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| runtime(format!("creating {}: {e}", out.display())))?;
    let run = Run {
        cfg,
        out,
        seed,
        stamp: format!("config_hash={} seed={seed}", cfg.hash(cmd.name(), UNHASHED)),
    };
    match cmd {
        Command::Gen => gen(&run),
        Command::Modulus => modulus(&run),
        Command::Cover => cover(&run),
        Command::Consistency => consistency(&run),
        Command::Interp => interp(&run),
        Command::Mlmc => mlmc(&run),
    }
}

fn metric_for(cfg: &Config, dim: usize) -> Result<Metric, CliError> {
    let default = if dim == 1 { "abs" } else { "euclidean" };
    Ok(
        match cfg.choice("metric", &["abs", "euclidean", "sphere"], Some(default))? {
            "abs" => Metric::Absolute,
            "sphere" => Metric::GreatCircle,
            _ => Metric::Euclidean,
        },
    )
}

fn one_d_sites(cfg: &Config, n: usize, seed: u64) -> Result<Vec<f64>, CliError> {
    match cfg.choice("sites", &["uniform", "iid-uniform"], Some("iid-uniform"))? {
        "uniform" => Ok(uniform_grid(n)?),
        _ => Ok(iid_uniform(n, &mut rng_for(seed, &[TAG_GEN, 1]))),
    }
}

fn generate(cfg: &Config, seed: u64) -> Result<LabeledDataset, CliError> {
    let name = cfg.choice("generator", GENERATORS, None)?;
    let n: usize = cfg.require("n", "number of generated sites")?;
    if n == 0 {
        return Err(CliError::Config("key `n` must be positive".into()));
    }
    let ds = match name {
        "wiener" => {
            let times =
                match cfg.choice("sites", &["uniform", "iid-uniform"], Some("iid-uniform"))? {
                    "uniform" => uniform_grid(n)?,
                    _ => iid_times(n, &mut rng_for(seed, &[TAG_GEN, 1])),
                };
            let w = sample_wiener_with(&times, &mut rng_for(seed, &[TAG_GEN, 2]))?;
            LabeledDataset::scalar(PointSet::line(times), w)?
        }
        "sqrt-1d" | "log-1d" => {
            let target = AnalyticModulus::parse(name).expect("listed generator");
            let xs = one_d_sites(cfg, n, seed)?;
            let ys = xs
                .iter()
                .map(|&x| target_function(target, x))
                .collect::<modcont::Result<Vec<f64>>>()?;
            LabeledDataset::scalar(PointSet::line(xs), ys)?
        }
        "sphere-field" => {
            let sites = fibonacci_lattice(n)?;
            let spec = GaussianFieldSpec::with_default_cap(
                CovarianceKind::SphereExponential,
                sites.clone(),
            )?;
            let ys = spec.sample(derive_seed(seed, &[TAG_GEN, 3]));
            LabeledDataset::scalar(sites, ys)?
        }
        _ => {
            let sites = fibonacci_lattice(n)?;
            let i0: usize = cfg.get("x0_index", 0)?;
            if i0 >= n {
                return Err(CliError::Config(format!(
                    "key `x0_index`: {i0} is not below n = {n}"
                )));
            }
            let x0 = sites.point(i0).to_vec();
            nonhoelder_sphere(&sites, &x0)?
        }
    };
    Ok(ds)
}

/// Dataset from exactly one of `dataset`, `timeseries` or `generator`.
fn load_data(run: &Run) -> Result<LabeledDataset, CliError> {
    let cfg = run.cfg;
    let given: Vec<&str> = ["dataset", "timeseries", "generator"]
        .into_iter()
        .filter(|k| cfg.has(k))
        .collect();
    match given.as_slice() {
        ["dataset"] => {
            let path = Path::new(cfg.raw("dataset").unwrap());
            let ds = read_dataset_csv(path, Metric::Euclidean)?;
            let metric = metric_for(cfg, ds.sites.dim())?;
            Ok(LabeledDataset::new(
                ds.sites.with_metric(metric)?,
                ds.values,
            )?)
        }
        ["timeseries"] => {
            let ts = load_timeseries(Path::new(cfg.raw("timeseries").unwrap()))?;
            if ts.skipped > 0 {
                eprintln!("skipped {} non-numeric rows", ts.skipped);
            }
            Ok(ts.dataset)
        }
        ["generator"] => generate(cfg, run.seed),
        [] => Err(CliError::Config(
            "missing data source: set one of `dataset`, `timeseries` or `generator`".into(),
        )),
        _ => Err(CliError::Config(format!(
            "set only one data source, got {}",
            given.join(" and ")
        ))),
    }
}

fn gen(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let ds = load_data(run)?;
    let name = run.cfg.raw("output").unwrap_or("dataset.csv");
    let path = run.out.join(name);
    write_dataset_csv(&ds, std::slice::from_ref(&run.stamp), &path)?;
    Ok(vec![path])
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "key `{key}` must be positive and finite, got {v}"
        )))
    }
}

fn modulus(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.cfg;
    let exact = cfg.flag("exact", false)?;
    let ds = load_data(run)?;
    let ts: Vec<f64> = match cfg.list::<f64>("t_grid")? {
        Some(ts) => {
            if ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(CliError::Config(
                    "key `t_grid`: entries must be finite and nonnegative".into(),
                ));
            }
            ts
        }
        None => {
            let m: usize = cfg.get("t_points", 1000)?;
            if m == 0 {
                return Err(CliError::Config("key `t_points` must be positive".into()));
            }
            let b = match cfg.opt::<f64>("t_max")? {
                Some(b) => positive("t_max", b)?,
                None => diameter(&ds.sites)?,
            };
            graded_grid(m, b)
        }
    };
    let values = if exact {
        modulus_at_many(&ds, &ts)
    } else {
        let r = positive(
            "r",
            cfg.require(
                "r",
                "sketch base radius in fast mode; set `exact = true` for the exact modulus",
            )?,
        )?;
        let growth = cfg.get("R", 2.0)?;
        if !(growth > 1.0) {
            return Err(CliError::Config(format!(
                "key `R` must exceed 1, got {growth}"
            )));
        }
        let horizon = match cfg.opt::<f64>("T")? {
            Some(t) => positive("T", t)?,
            None => diameter(&ds.sites)?.max(r),
        };
        let inject = cfg.flag("inject_extremal", true)?;
        build_sketch(&ds, r, growth, horizon, inject)?.eval_many(&ts)?
    };
    let rows: Vec<String> = ts
        .iter()
        .zip(&values)
        .map(|(t, v)| format!("{t},{v}"))
        .collect();
    Ok(vec![run.write("modulus.csv", "t,value", &rows)?])
}

fn cover(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.cfg;
    let radius: f64 = cfg.require("radius", "closed-ball radius of the cover")?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(CliError::Config(format!(
            "key `radius` must be finite and nonnegative, got {radius}"
        )));
    }
    let leaf_max: usize = cfg.get("leaf_max", 32)?;
    let ds = load_data(run)?;
    let tree = ClusterTree::build(&ds.sites, leaf_max)?;
    let c = greedy_cover(&ds.sites, radius, Some(&tree))?;
    let text = format!("# {}\n{}", run.stamp, c.to_csv());
    Ok(vec![run.write_raw("cover.csv", &text)?])
}

fn consistency(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.cfg;
    let target = AnalyticModulus::parse(cfg.choice("target", &["sqrt-1d", "log-1d"], None)?)
        .expect("listed target");
    let scheme = match cfg.choice("scheme", &["uniform", "iid-uniform"], Some("uniform"))? {
        "uniform" => SiteScheme::Uniform,
        _ => SiteScheme::IidUniform,
    };
    let ns = match cfg.list::<usize>("ns")? {
        Some(ns) => ns,
        None => {
            let j_max: u32 = cfg.get("j_max", 12)?;
            if j_max > 24 {
                return Err(CliError::Config(format!(
                    "key `j_max` must be at most 24, got {j_max}"
                )));
            }
            (0..=j_max).map(|j| (1usize << j) + 1).collect()
        }
    };
    let rows = consistency_study(&ConsistencyConfig {
        target,
        scheme,
        ns,
        replicas: cfg.get("replicas", 10)?,
        quad_points: cfg.get("quad_points", 10_000)?,
        seed: run.seed,
    })?;
    let rows: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{}", r.n, r.mean_error, r.std_error))
        .collect();
    Ok(vec![run.write(
        "consistency.csv",
        "n,mean_error,std_error",
        &rows,
    )?])
}

fn interp(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.cfg;
    let leaf_max: usize = cfg.get("leaf_max", 32)?;
    let replicas: usize = cfg.get("replicas", 10)?;
    let ds = load_data(run)?;
    let rows = interpolation_study(&ds, leaf_max, replicas, run.seed)?;
    let sketch = match cfg.opt::<f64>("r")? {
        Some(r) => {
            let r = positive("r", r)?;
            let growth = cfg.get("R", 2.0)?;
            let horizon = match cfg.opt::<f64>("T")? {
                Some(t) => t,
                None => diameter(&ds.sites)?.max(r),
            };
            Some(build_sketch(&ds, r, growth, horizon, true)?)
        }
        None => None,
    };
    let mut header = String::from("level,cells,h,mean_error,std_error,max_error,omega");
    if sketch.is_some() {
        header.push_str(",omega_sketch");
    }
    let mut out = Vec::with_capacity(rows.len());
    for r in &rows {
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            r.level, r.cells, r.h, r.mean_error, r.std_error, r.max_error, r.omega
        );
        if let Some(s) = &sketch {
            let _ = write!(line, ",{}", s.eval(r.h)?);
        }
        out.push(line);
    }
    Ok(vec![run.write("interp.csv", &header, &out)?])
}

fn mlmc(run: &Run) -> Result<Vec<PathBuf>, CliError> {
    let cfg = run.cfg;
    let field = match cfg.choice("field", &["wiener", "sphere"], None)? {
        "wiener" => MlmcField::Wiener,
        _ => MlmcField::Sphere,
    };
    let ns: Vec<usize> = cfg.list("ns")?.ok_or_else(|| {
        CliError::Config("missing required key `ns` (comma-separated N values)".into())
    })?;
    if ns.contains(&0) {
        return Err(CliError::Config(
            "key `ns`: entries must be positive".into(),
        ));
    }
    let rows = mlmc_study(&MlmcConfig {
        field,
        ns,
        replicas: cfg.get("replicas", 10)?,
        leaf_max: cfg.get("leaf_max", 1)?,
        alpha: cfg.get("alpha", 0.5)?,
        q0_factor: cfg.get("q0_factor", 1.0)?,
        seed: run.seed,
    })?;
    let rows: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{}", r.n, r.levels, r.mean_error, r.std_error))
        .collect();
    Ok(vec![run.write(
        "mlmc.csv",
        "n,levels,mean_error,std_error",
        &rows,
    )?])
}
