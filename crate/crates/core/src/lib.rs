//! Crowd-size estimation for monostatic radar under non-uniform spatial
//! priors.
//!
//! The pipeline has three layers:
//!
//! 1. [`geometry`] — exact angular-interval occlusion of disc-shaped agents:
//!    visibility intervals, blockage predicates, and per-realization
//!    visibility via interval-union coverage.
//! 2. [`spatial`] and [`model`] — spatial priors over the radar's quadrant,
//!    Sobol-based quasi-Monte Carlo integration, and the analytical
//!    blockage probabilities `p1(x)`, `p2(x)` composing into the visibility
//!    likelihood `P(V|N, x)` and its spatial average `P(V|N)`.
//! 3. [`estimator`] and [`sim`] — binomial models of the visible count,
//!    KL-divergence matching against empirical observations, and a seeded
//!    Monte Carlo sweep harness with a uniform-prior baseline.

pub mod estimator;
pub mod geometry;
pub mod model;
pub mod props;
pub mod sim;
pub mod sobol;
pub mod spatial;

pub use estimator::{
    analytical_pmf, empirical_pmf, estimate_crowd_size, kl_divergence, EstimationResult,
    EstimatorError, Provenance, VisiblePmf,
};
pub use geometry::{
    audit_blockage_explanations, count_visible, is_complete_1_blockage, is_partial_1_blockage,
    is_simultaneous_2_blockage, uncovered_measure, union_covers, visibility_interval,
    visible_agents, AngularInterval, CrowdRealization, GeometryError, PolarPoint, SceneConfig,
};
pub use model::{
    compute_p1, compute_p2, r1_membership, visibility_likelihood, BlockageField, ModelError,
    VisibilityCurve,
};
pub use sim::{
    run_sweep, run_sweep_with, simulate_counts, ExperimentSpec, SimError, SweepEntry,
    SweepResult,
};
pub use spatial::{
    build_sobol_cloud, canonical_suite, qmc_integrate, DensityKind, DensitySpec, GaussComponent,
    MaskMode, MaskShape, SobolCloud, SpatialDensity, SpatialError,
};
