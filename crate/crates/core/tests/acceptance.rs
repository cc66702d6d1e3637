//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modcont::covering::{covering_probability_bound, greedy_cover};
use modcont::datagen::{
    fibonacci_lattice, iid_times, nonhoelder_sphere, random_sphere_points, sample_wiener_with,
};
use modcont::experiments::{
    consistency_study, empirical_cover_frequency, interpolation_study, loglog_slope, mlmc_study,
    ConsistencyConfig, MlmcConfig, MlmcField, SiteScheme,
};
use modcont::metric::{diameter, separation_distance};
use modcont::mlmc::{
    convergence_factor_mi, convergence_factor_ml, mimc_correlation, mlmc_mean_on,
    DeterministicSampler, LevelHierarchy, SampleMode, SampleSchedule,
};
use modcont::modulus::{modulus_at_many_indexed, modulus_full};
use modcont::spatial::{eps_neighbors, eps_neighbors_brute};
use modcont::{
    build_sketch, modulus_at, modulus_at_many, AnalyticModulus, ClusterTree, LabeledDataset,
    Metric, PointSet, RhoClass,
};

type Outcome = Result<(bool, String), modcont::Error>;

struct Gate {
    failures: usize,
}

impl Gate {
    fn run(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed <= budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {detail} ({:.3} s, budget {:.3} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        );
    }
}

fn line_ds(xs: Vec<f64>, ys: Vec<f64>) -> LabeledDataset {
    LabeledDataset::scalar(PointSet::line(xs), ys).unwrap()
}

/// Random point set: 1-D, 2-D, 3-D Euclidean or the unit sphere.
fn random_points(kind: usize, n: usize, rng: &mut ChaCha8Rng) -> PointSet {
    match kind % 4 {
        0 => PointSet::line((0..n).map(|_| rng.random::<f64>()).collect()),
        1 | 2 => {
            let dim = kind % 4 + 1;
            let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
            PointSet::from_flat(dim, coords, Metric::Euclidean).unwrap()
        }
        _ => random_sphere_points(n, rng).unwrap(),
    }
}

fn zigzag_oracle() -> Outcome {
    let sites: Vec<f64> = (1..=6).map(f64::from).collect();
    let f = modulus_full(&line_ds(sites.clone(), vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0]));
    let g = modulus_full(&line_ds(sites, vec![3.0, 2.0, 3.0, 3.0, 4.0, 3.0]));
    let ok = f.breakpoints() == [1.0, 3.0, 5.0]
        && f.values() == [3.0, 4.0, 5.0]
        && g.breakpoints() == [1.0, 3.0]
        && g.values() == [1.0, 2.0];
    Ok((
        ok,
        format!(
            "f: {:?}/{:?}, g: {:?}/{:?}",
            f.breakpoints(),
            f.values(),
            g.breakpoints(),
            g.values()
        ),
    ))
}

fn eps_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut queries = 0usize;
    let mut mismatches = 0usize;
    for inst in 0..50 {
        let n = rng.random_range(1..=2000);
        let ps = random_points(inst, n, &mut rng);
        let tree = ClusterTree::build(&ps, rng.random_range(1..=40))?;
        let diam = diameter(&ps)?;
        for q in 0..40 {
            let x: Vec<f64> = if q % 2 == 0 {
                ps.point(rng.random_range(0..n)).to_vec()
            } else {
                random_points(inst, 1, &mut rng).point(0).to_vec()
            };
            let eps = match q % 5 {
                0 => 0.0,
                1 => diam * 1.1,
                _ => diam * rng.random::<f64>().powi(3),
            };
            queries += 1;
            if eps_neighbors(&tree, &ps, &x, eps) != eps_neighbors_brute(&ps, &x, eps) {
                mismatches += 1;
            }
        }
    }
    Ok((
        mismatches == 0,
        format!("{queries} queries, {mismatches} mismatches"),
    ))
}

/// Minimum cover size by enumerating subsets in order of size.
fn optimum_cover(ps: &PointSet, radius: f64) -> usize {
    let n = ps.len();
    let masks: Vec<u32> = (0..n)
        .map(|j| {
            (0..n)
                .filter(|&z| ps.dist(j, z) <= radius)
                .fold(0, |m, z| m | 1 << z)
        })
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let mut best = n;
    for subset in 1u32..(1 << n) {
        let size = subset.count_ones() as usize;
        if size >= best {
            continue;
        }
        let mut covered = 0;
        for (j, m) in masks.iter().enumerate() {
            if subset & (1 << j) != 0 {
                covered |= m;
            }
        }
        if covered == full {
            best = size;
        }
    }
    best
}

fn greedy_guarantee() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let instances = 200;
    for inst in 0..instances {
        let n = rng.random_range(1..=16);
        let ps = random_points(inst, n, &mut rng);
        let radius = diameter(&ps)?.max(1e-9) * rng.random_range(0.05..0.7);
        let greedy = greedy_cover(&ps, radius, None)?.len();
        let opt = optimum_cover(&ps, radius);
        let ratio = greedy as f64 / opt as f64;
        worst = worst.max(ratio / ((n as f64).ln() + 1.0));
        if ratio > (n as f64).ln() + 1.0 {
            violations += 1;
        }
    }
    let five = PointSet::line(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    let g = greedy_cover(&five, 1.0, None)?;
    let example_ok = g.center_indices == [1, 3] && optimum_cover(&five, 1.0) == 2;
    Ok((
        violations == 0 && example_ok,
        format!(
            "{instances} instances, {violations} violations, worst ratio/(ln N + 1) = {worst:.3}; \
             {{0..4}} centers {:?}",
            g.center_indices
        ),
    ))
}

fn sketch_exact_branch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut exact_checks = 0;
    let mut exact_fail = 0;
    let mut lower_checks = 0;
    let mut lower_fail = 0;
    for inst in 0..20 {
        let n = rng.random_range(2..=2000);
        let sites = random_points(inst, n, &mut rng);
        let ys: Vec<f64> = (0..n)
            .map(|i| {
                sites.point(i).iter().map(|c| (5.0 * c).sin()).sum::<f64>()
                    + 0.2 * rng.random::<f64>()
            })
            .collect();
        let ds = LabeledDataset::scalar(sites, ys)?;
        let diam = diameter(&ds.sites)?;
        let r = diam * rng.random_range(0.005..0.1);
        let growth = rng.random_range(1.5..3.0);
        let sketch = build_sketch(&ds, r, growth, diam, inst % 2 == 0)?;
        let mut small: Vec<f64> = (0..20).map(|_| r * rng.random::<f64>()).collect();
        small.push(r);
        small.push(0.0);
        for &t in &small {
            exact_checks += 1;
            if sketch.eval(t)?.to_bits() != modulus_at(&ds, t).to_bits() {
                exact_fail += 1;
            }
        }
        let ts: Vec<f64> = (0..100).map(|_| diam * rng.random::<f64>()).collect();
        let exact = modulus_at_many(&ds, &ts);
        let approx = sketch.eval_many(&ts)?;
        for (a, e) in approx.iter().zip(&exact) {
            lower_checks += 1;
            if a > e {
                lower_fail += 1;
            }
        }
    }
    Ok((
        exact_fail == 0 && lower_fail == 0,
        format!(
            "exact branch {exact_fail}/{exact_checks} mismatches, lower bound {lower_fail}/{lower_checks} violations"
        ),
    ))
}

fn uniform_consistency() -> Outcome {
    let ns: Vec<usize> = (0..=12).map(|j| (1usize << j) + 1).collect();
    let rows = consistency_study(&ConsistencyConfig {
        target: AnalyticModulus::Sqrt1d,
        scheme: SiteScheme::Uniform,
        ns: ns.clone(),
        replicas: 1,
        quad_points: 10_000,
        seed: 0,
    })?;
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &errs)?;
    Ok((
        (-1.25..=-0.75).contains(&slope),
        format!(
            "slope {slope:.3}, error {:.3e} -> {:.3e}",
            errs[0],
            errs[errs.len() - 1]
        ),
    ))
}

fn iid_consistency() -> Outcome {
    let ns: Vec<usize> = (2..=12).map(|j| (1usize << j) + 1).collect();
    let rows = consistency_study(&ConsistencyConfig {
        target: AnalyticModulus::Sqrt1d,
        scheme: SiteScheme::IidUniform,
        ns: ns.clone(),
        replicas: 10,
        quad_points: 10_000,
        seed: 6,
    })?;
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &errs)?;
    Ok((
        (-0.75..=-0.25).contains(&slope),
        format!(
            "slope {slope:.3}, mean error {:.3e} -> {:.3e}",
            errs[0],
            errs[errs.len() - 1]
        ),
    ))
}

fn interpolation_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let times = iid_times(10_000, &mut rng);
    let path = sample_wiener_with(&times, &mut rng)?;
    let wiener = LabeledDataset::scalar(PointSet::line(times), path)?;
    let lattice = fibonacci_lattice(10_000)?;
    let x0 = lattice.point(0).to_vec();
    let sphere = nonhoelder_sphere(&lattice, &x0)?;
    // 10-minute readings over 60 days: daily cycle, noise and a sudden drop
    let minutes: Vec<f64> = (0..8640).map(|k| 10.0 * k as f64).collect();
    let temps = minutes
        .iter()
        .map(|&m| {
            let day = 2.0 * PI * m / 1440.0;
            let drop = if (40_000.0..40_600.0).contains(&m) {
                -10.0
            } else {
                0.0
            };
            15.0 + 6.0 * day.sin() + rng.random_range(-0.5..0.5) + drop
        })
        .collect();
    let series = line_ds(minutes, temps);
    let mut levels = 0;
    let mut violations = 0;
    let mut detail = Vec::new();
    for (name, ds) in [
        ("wiener", &wiener),
        ("sphere", &sphere),
        ("series", &series),
    ] {
        let rows = interpolation_study(ds, 8, 5, 70)?;
        let v = rows.iter().filter(|r| r.max_error > r.omega).count();
        levels += rows.len();
        violations += v;
        detail.push(format!("{name}: {} levels", rows.len()));
    }
    Ok((
        violations == 0,
        format!(
            "{}; {violations} violations over {levels} levels",
            detail.join(", ")
        ),
    ))
}

fn wiener_shape() -> Outcome {
    let ts: Vec<f64> = (0..=12)
        .map(|k| 1e-4 * 100f64.powf(k as f64 / 12.0))
        .collect();
    let paths = 5;
    let mut sketch_sum = vec![0.0; ts.len()];
    let mut exact_sum = vec![0.0; ts.len()];
    for p in 0..paths {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + p);
        let times = iid_times(100_000, &mut rng);
        let w = sample_wiener_with(&times, &mut rng)?;
        let ds = line_ds(times, w);
        let sketch = build_sketch(&ds, 1e-5, 2.0, 1.0, true)?;
        for (s, v) in sketch_sum.iter_mut().zip(sketch.eval_many(&ts)?) {
            *s += v;
        }
        let tree = ClusterTree::build(&ds.sites, 32)?;
        for (s, v) in exact_sum
            .iter_mut()
            .zip(modulus_at_many_indexed(&ds, &tree, &ts))
        {
            *s += v;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut lo_exact = f64::INFINITY;
    let mut hi_exact = 0.0f64;
    for (k, &t) in ts.iter().enumerate() {
        let reference = AnalyticModulus::WienerApprox.eval(t)?;
        let ratio = sketch_sum[k] / paths as f64 / reference;
        let ratio_exact = exact_sum[k] / paths as f64 / reference;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        lo_exact = lo_exact.min(ratio_exact);
        hi_exact = hi_exact.max(ratio_exact);
    }
    let band = 0.5..=1.6;
    Ok((
        band.contains(&lo)
            && band.contains(&hi)
            && band.contains(&lo_exact)
            && band.contains(&hi_exact),
        format!(
            "sketch ratio in [{lo:.3}, {hi:.3}], exact ratio in [{lo_exact:.3}, {hi_exact:.3}]"
        ),
    ))
}

fn nonhoelder_modulus() -> Outcome {
    let lattice = fibonacci_lattice(10_000)?;
    let x0 = lattice.point(0).to_vec();
    let ds = nonhoelder_sphere(&lattice, &x0)?;
    let ts: Vec<f64> = (0..20)
        .map(|k| 0.05 * (PI / 0.05).powf(k as f64 / 19.0))
        .collect();
    let step = modulus_full(&ds);
    let mut worst = 0.0f64;
    for &t in &ts {
        let err = (step.eval(t) - AnalyticModulus::LogSphere.eval(t)?).abs();
        worst = worst.max(err);
    }
    let q = separation_distance(&ds.sites)?;
    let below = [0.0, 0.5 * q, q * (1.0 - 1e-9)];
    let zero_below = below.iter().all(|&t| step.eval(t) == 0.0);
    Ok((
        worst <= 0.05 && zero_below,
        format!("max abs error {worst:.4}, zero below separation {q:.3e}: {zero_below}"),
    ))
}

fn mlmc_rate() -> Outcome {
    let ns = vec![100, 1000, 10_000];
    let rows = mlmc_study(&MlmcConfig {
        field: MlmcField::Wiener,
        ns: ns.clone(),
        replicas: 10,
        leaf_max: 1,
        alpha: 0.5,
        q0_factor: 1.0,
        seed: 10,
    })?;
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &errs)?;
    Ok((
        (-0.7..=-0.3).contains(&slope),
        format!(
            "slope {slope:.3}, errors {:.3e} -> {:.3e}",
            errs[0],
            errs[errs.len() - 1]
        ),
    ))
}

fn telescoping() -> Outcome {
    let lattice = fibonacci_lattice(2000)?;
    let vals: Vec<f64> = (0..2000)
        .map(|i| (3.0 * lattice.point(i)[0]).sin())
        .collect();
    let tree = ClusterTree::build(&lattice, 2)?;
    let j = tree.depth();
    let h = LevelHierarchy::new(&tree, j, 11)?;
    let direct = h.interpolate_finest(&vals);
    let schedule = SampleSchedule::new((0..=j).map(|l| (50usize >> l).max(1)).collect())?;
    let det = mlmc_mean_on(
        &DeterministicSampler::new(vals),
        &h,
        &schedule,
        11,
        SampleMode::Independent,
    )?;
    let det_err = det
        .mean()
        .unwrap()
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let constant = DeterministicSampler::new(vec![2.5; 2000]);
    let mi = mimc_correlation(&constant, &tree, &schedule, 1)?;
    let c = mi.correlation().unwrap();
    let mi_ok = [(0, 0), (0, 1999), (700, 12), (1500, 1500)]
        .iter()
        .all(|&(s, t)| c.entry(s, t).map(|v| v == 6.25).unwrap_or(false));
    Ok((
        det_err <= 1e-12 && mi_ok,
        format!(
            "deterministic max deviation {det_err:.2e}, constant-field correlation exact: {mi_ok}"
        ),
    ))
}

fn convergence_factors() -> Outcome {
    let lin = RhoClass::power(1.0)?;
    let ml = convergence_factor_ml(&lin, &SampleSchedule::new(vec![4])?, 1.0, 1.0);
    let mi = convergence_factor_mi(&lin, &SampleSchedule::new(vec![1])?, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    let trials = 2000;
    for _ in 0..trials {
        let levels = rng.random_range(1..=8);
        let mut q: Vec<usize> = (0..levels).map(|_| rng.random_range(1..=1000)).collect();
        q.sort_unstable_by(|a, b| b.cmp(a));
        let alpha = rng.random_range(0.1..=1.0);
        let rho = RhoClass::power(alpha)?;
        let c = rng.random_range(0.1..3.0);
        let u = rng.random_range(0.2..2.0);
        let j = rng.random_range(0..levels);
        let mut more = q.clone();
        more[j] += rng.random_range(1..=500);
        for k in 0..j {
            more[k] = more[k].max(more[j]);
        }
        let a = SampleSchedule::new(q)?;
        let b = SampleSchedule::new(more)?;
        if convergence_factor_ml(&rho, &b, c, u) > convergence_factor_ml(&rho, &a, c, u)
            || convergence_factor_mi(&rho, &b, c, u) > convergence_factor_mi(&rho, &a, c, u)
        {
            violations += 1;
        }
    }
    Ok((
        ml == 3.0 && mi == 18.0 && violations == 0,
        format!("sigma_ML = {ml}, sigma_MI = {mi}, {violations}/{trials} monotonicity violations"),
    ))
}

fn covering_probability() -> Outcome {
    let r = 0.2;
    // covering number of [0, 1] by balls of radius r/2 = 0.1, and the
    // smallest ball mass 0.1 attained at the endpoints
    let cover_count = 5;
    let eta = 0.9;
    let trials = 10_000;
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [10, 20, 40] {
        let p = covering_probability_bound(cover_count, eta, n)?;
        let freq = empirical_cover_frequency(n, r, trials, 13);
        let pc = p.clamp(0.0, 1.0);
        let sigma = (pc * (1.0 - pc) / trials as f64).sqrt();
        ok &= freq >= p - 3.0 * sigma;
        detail.push(format!("N={n}: P={p:.4}, empirical {freq:.4}"));
    }
    Ok((ok, detail.join("; ")))
}

fn main() {
    let mut gate = Gate { failures: 0 };
    let s = Duration::from_secs;
    gate.run(
        1,
        "zigzag step-function oracle",
        Duration::from_millis(1),
        zigzag_oracle,
    );
    gate.run(2, "eps-range search exactness", s(5), eps_exactness);
    gate.run(3, "greedy cover guarantee", s(10), greedy_guarantee);
    gate.run(
        4,
        "sketch exact branch and lower bound",
        s(60),
        sketch_exact_branch,
    );
    gate.run(
        5,
        "uniform-grid consistency slope",
        s(60),
        uniform_consistency,
    );
    gate.run(6, "iid consistency slope", s(120), iid_consistency);
    gate.run(7, "interpolation bound", s(120), interpolation_bound);
    gate.run(8, "Wiener modulus shape", s(180), wiener_shape);
    gate.run(9, "non-Hölder sphere modulus", s(120), nonhoelder_modulus);
    gate.run(10, "MLMC rate", s(300), mlmc_rate);
    gate.run(11, "telescoping and zero variance", s(1), telescoping);
    gate.run(12, "convergence factors", s(60), convergence_factors);
    gate.run(13, "covering probability", s(60), covering_probability);
    if gate.failures > 0 {
        println!("{} acceptance criteria failed", gate.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
