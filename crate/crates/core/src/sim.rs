//! Monte Carlo experiment engine.
//!
//! Generates seeded crowd realizations, counts visible agents with the exact
//! interval-union geometry, builds empirical PMFs, and runs full estimation
//! sweeps with an optional uniform-prior baseline. Every realization draws
//! from its own counter-derived random stream, so results are bit-identical
//! for a given master seed regardless of how many workers run them.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::estimator::{empirical_pmf, estimate_crowd_size, EstimatorError, VisiblePmf};
use crate::geometry::{
    audit_blockage_explanations, count_visible, CrowdRealization, GeometryError, SceneConfig,
};
use crate::model::{BlockageField, ModelError, VisibilityCurve};
use crate::spatial::{build_sobol_cloud, DensityKind, DensitySpec, SpatialDensity, SpatialError};

/// Version tag written into every serialized result.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("n_values must be non-empty and within [1, n_max={n_max}]")]
    BadNValues { n_max: u32 },
    #[error("realizations must be at least 1")]
    NoRealizations,
    #[error(
        "blockage audit failed: N={n}, realization {realization}, agent {agent} blocked \
         without a single complete blocker or an opposite-side pair"
    )]
    AuditFailure {
        n: u32,
        realization: u32,
        agent: usize,
    },
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
}

fn default_realizations() -> u32 {
    10_000
}
fn default_n_max() -> u32 {
    30
}
fn default_sobol_m() -> u32 {
    14
}
fn default_n_values() -> Vec<u32> {
    (1..=30).collect()
}
fn default_baseline() -> bool {
    true
}
fn default_audit() -> bool {
    true
}

/// Everything needed to reproduce one sweep over true crowd sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scene: SceneConfig,
    pub density: DensitySpec,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<u32>,
    #[serde(default = "default_realizations")]
    pub realizations: u32,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_sobol_m")]
    pub sobol_m: u32,
    /// Also run the uniform-prior estimator on the same observations.
    #[serde(default = "default_baseline")]
    pub baseline: bool,
    /// Worker thread count; 0 uses the ambient rayon pool.
    #[serde(default)]
    pub workers: usize,
    /// Verify, for every blocked agent, that a single complete blocker or an
    /// opposite-side overlapping pair explains the blockage.
    #[serde(default = "default_audit")]
    pub audit: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scene.validate()?;
        if self.realizations < 1 {
            return Err(SimError::NoRealizations);
        }
        if self.n_values.is_empty()
            || self
                .n_values
                .iter()
                .any(|&n| n < 1 || n > self.n_max)
        {
            return Err(SimError::BadNValues { n_max: self.n_max });
        }
        Ok(())
    }
}

/// Counter-derived stream for realization `r` of crowd size `n`: the seed is
/// the little-endian concatenation of (master, n, r, tag), so parallel
/// scheduling can never reorder randomness.
pub fn realization_rng(master_seed: u64, n: u32, realization: u32) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(n as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(realization as u64).to_le_bytes());
    seed[24..32].copy_from_slice(&0x63726f7764657374u64.to_le_bytes()); // "crowdest"
    ChaCha8Rng::from_seed(seed)
}

fn with_pool<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T, SimError> + Send,
) -> Result<T, SimError> {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SimError::ThreadPool(e.to_string()))?
            .install(f)
    }
}

/// Observed `N_v` for each of `spec.realizations` seeded crowds of size `n`.
pub fn simulate_counts(
    spec: &ExperimentSpec,
    density: &SpatialDensity,
    n: u32,
) -> Result<Vec<u32>, SimError> {
    spec.validate()?;
    with_pool(spec.workers, || simulate_counts_inner(spec, density, n))
}

fn simulate_counts_inner(
    spec: &ExperimentSpec,
    density: &SpatialDensity,
    n: u32,
) -> Result<Vec<u32>, SimError> {
    let scene = spec.scene;
    (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = realization_rng(spec.master_seed, n, r);
            let agents = density.sample(n as usize, &mut rng)?;
            let crowd = CrowdRealization::new(agents, &scene)?;
            if spec.audit {
                if let Some(agent) = audit_blockage_explanations(&crowd, &scene) {
                    return Err(SimError::AuditFailure {
                        n,
                        realization: r,
                        agent,
                    });
                }
            }
            Ok(count_visible(&crowd, &scene) as u32)
        })
        .collect()
}

/// One row of a sweep: everything observed and estimated for a true `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepEntry {
    pub true_n: u32,
    pub n_star: u32,
    #[serde(with = "crate::estimator::kl_vec")]
    pub kl_by_n: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_star_baseline: Option<u32>,
    #[serde(
        default,
        with = "crate::estimator::kl_vec_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub kl_by_n_baseline: Option<Vec<f64>>,
    pub empirical: VisiblePmf,
    /// Empirical `mean(N_v) / N` across realizations.
    pub mean_visible_fraction: f64,
    /// Model-side `P(V|N)` for the density-matched prior.
    pub expected_visibility: f64,
}

/// Full sweep output, serializable deterministically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub density_name: Option<String>,
    pub master_seed: u64,
    pub realizations: u32,
    pub entries: Vec<SweepEntry>,
    pub mae: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_mae: Option<f64>,
    pub curve: VisibilityCurve,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_curve: Option<VisibilityCurve>,
}

/// Builds the density, its blockage field, and (optionally) the uniform
/// baseline field, returning the visibility curves for estimation.
pub fn build_curves(
    spec: &ExperimentSpec,
) -> Result<(SpatialDensity, VisibilityCurve, Option<VisibilityCurve>), SimError> {
    spec.validate()?;
    let density = SpatialDensity::from_spec(&spec.density, &spec.scene)?;
    let cloud = Arc::new(build_sobol_cloud(&spec.scene, spec.sobol_m)?);
    let curve = with_pool(spec.workers, || {
        Ok(BlockageField::build(cloud.clone(), &density).visibility_curve(spec.n_max)?)
    })?;
    let baseline_curve = if spec.baseline {
        let uniform = SpatialDensity::new(DensityKind::Uniform, spec.scene)?;
        Some(with_pool(spec.workers, || {
            Ok(BlockageField::build(cloud, &uniform).visibility_curve(spec.n_max)?)
        })?)
    } else {
        None
    };
    Ok((density, curve, baseline_curve))
}

/// Simulates, estimates, and aggregates MAE for every `N` in
/// `spec.n_values`, using prebuilt visibility curves.
pub fn run_sweep_with(
    spec: &ExperimentSpec,
    density: &SpatialDensity,
    curve: &VisibilityCurve,
    baseline_curve: Option<&VisibilityCurve>,
) -> Result<SweepResult, SimError> {
    spec.validate()?;
    let mut entries = Vec::with_capacity(spec.n_values.len());
    let mut abs_err_sum = 0.0;
    let mut abs_err_base_sum = 0.0;
    for &n in &spec.n_values {
        let counts = simulate_counts(spec, density, n)?;
        let empirical = empirical_pmf(&counts, spec.n_max)?;
        let est = estimate_crowd_size(&empirical, curve, spec.n_max)?;
        let baseline = baseline_curve
            .map(|bc| estimate_crowd_size(&empirical, bc, spec.n_max))
            .transpose()?;
        let mean_nv =
            counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
        abs_err_sum += (est.n_star as f64 - n as f64).abs();
        if let Some(b) = &baseline {
            abs_err_base_sum += (b.n_star as f64 - n as f64).abs();
        }
        entries.push(SweepEntry {
            true_n: n,
            n_star: est.n_star,
            kl_by_n: est.kl_by_n,
            n_star_baseline: baseline.as_ref().map(|b| b.n_star),
            kl_by_n_baseline: baseline.map(|b| b.kl_by_n),
            empirical,
            mean_visible_fraction: mean_nv / n as f64,
            expected_visibility: curve.at(n),
        });
    }
    let count = spec.n_values.len() as f64;
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        density_name: spec.density.name.clone(),
        master_seed: spec.master_seed,
        realizations: spec.realizations,
        mae: abs_err_sum / count,
        baseline_mae: baseline_curve.map(|_| abs_err_base_sum / count),
        entries,
        curve: curve.clone(),
        baseline_curve: baseline_curve.cloned(),
    })
}

/// End-to-end sweep: build fields and curves, then simulate and estimate.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult, SimError> {
    let (density, curve, baseline_curve) = build_curves(spec)?;
    run_sweep_with(spec, &density, &curve, baseline_curve.as_ref())
}
