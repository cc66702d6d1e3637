//! Discrete modulus of continuity for site-to-value data.
//!
//! The crate evaluates `ω_N(Y_N, t)` exactly and through a coarsened multilevel
//! sketch, builds greedy ball covers and cluster trees, interpolates data on
//! partitions, and estimates mean fields with multilevel and multi-index
//! Monte Carlo.
//!
//! With the default `parallel` feature the heavy loops run on rayon; without
//! it the same code runs sequentially and produces identical results.

// `!(x > 0.0)` style checks are kept because they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covering;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod interpolation;
pub mod metric;
pub mod mlmc;
pub mod modulus;
pub mod par;
pub mod sketch;
pub mod spatial;

pub use covering::{covering_number_upper, covering_probability_bound, greedy_cover, Covering};
pub use error::{Error, Result};
pub use interpolation::{
    exact_mesh_size, interpolate, interpolation_error, tree_partition, voronoi_partition, Partition,
};
pub use metric::{LabeledDataset, Metric, PointSet};
pub use mlmc::{
    convergence_factor_mi, convergence_factor_ml, hoelder_schedule, mc_mean, mimc_correlation,
    mlmc_mean, EstimatorResult, FieldSampler, SampleSchedule,
};
pub use modulus::{
    analytic_modulus, modulus_at, modulus_at_many, modulus_full, seminorm, AnalyticModulus,
    RhoClass, StepFunction,
};
pub use sketch::{build_sketch, ModulusSketch};
pub use spatial::{eps_neighbors, ClusterTree};
