use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modcont::datagen::{iid_times, sample_wiener_with};
use modcont::{
    build_sketch, greedy_cover, modulus_at_many, modulus_full, ClusterTree, LabeledDataset,
    PointSet,
};

fn wiener(n: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let times = iid_times(n, &mut rng);
    let w = sample_wiener_with(&times, &mut rng).unwrap();
    LabeledDataset::scalar(PointSet::line(times), w).unwrap()
}

fn mode() -> &'static str {
    if modcont::par::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

/// Runs `f` on the global pool and, with rayon enabled, on a one-thread pool
/// for a sequential baseline of the same build.
fn both<F: Fn() + Sync>(c: &mut Criterion, group: &str, n: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new(mode(), n), &n, |b, _| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        g.bench_with_input(BenchmarkId::new("one-thread", n), &n, |b, _| {
            b.iter(|| pool.install(&f))
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let ds = wiener(4000);
    let ts: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
    both(c, "modulus_at_many", ds.len(), || {
        std::hint::black_box(modulus_at_many(&ds, &ts));
    });
    both(c, "modulus_full", ds.len(), || {
        std::hint::black_box(modulus_full(&ds));
    });
    let tree = ClusterTree::build(&ds.sites, 32).unwrap();
    both(c, "greedy_cover", ds.len(), || {
        std::hint::black_box(greedy_cover(&ds.sites, 0.01, Some(&tree)).unwrap());
    });
    let big = wiener(50_000);
    both(c, "build_sketch", big.len(), || {
        std::hint::black_box(build_sketch(&big, 1e-4, 2.0, 1.0, true).unwrap());
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
