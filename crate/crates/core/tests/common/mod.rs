//! Shared helpers for the integration suites: thin wrappers over the
//! library's randomized property suites plus a brute-force midpoint
//! visibility oracle and predicate-level Monte Carlo oracles for the
//! blockage probabilities.
// Each integration test target compiles this module separately and uses a
// different subset of it.
#![allow(dead_code, unused_imports)]

use crowdest_core::props;
use crowdest_core::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crowdest_core::props::{agent_with_min_r, targeted_blocker, targeted_side_blocker};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scene() -> SceneConfig {
    SceneConfig::new(0.25, 14.5).unwrap()
}

pub fn lemma1_counterexamples(cfg: &SceneConfig, samples: u64, seed: u64) -> usize {
    props::lemma1_suite(cfg, samples, seed).counterexamples.len()
}

pub fn lemma2_counterexamples(cfg: &SceneConfig, samples: u64, seed: u64) -> usize {
    props::lemma2_suite(cfg, samples, seed).counterexamples.len()
}

pub fn three_blockage_counterexamples(cfg: &SceneConfig, crowds: u64, k: usize, seed: u64) -> usize {
    props::triple_blockage_suite(cfg, crowds, k, seed, None)
        .counterexamples
        .len()
}

/// Predicate-level visibility oracle without any injected defect.
pub fn predicate_visible(crowd: &CrowdRealization, cfg: &SceneConfig) -> Vec<usize> {
    props::predicate_visible(crowd, cfg, None)
}

/// Brute-force visibility oracle: partitions each agent's interval at every
/// blocker endpoint and probes the midpoint of each sub-gap wider than the
/// angular epsilon. Independent of both the production sweep-line merge and
/// the predicate-level oracle.
pub fn brute_force_visible(crowd: &CrowdRealization, cfg: &SceneConfig) -> Vec<usize> {
    let pts = crowd.agents();
    let ivs: Vec<_> = pts
        .iter()
        .map(|p| visibility_interval(p, cfg).unwrap())
        .collect();
    let mut out = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        let ivx = &ivs[i];
        let blockers: Vec<&AngularInterval> = pts
            .iter()
            .zip(&ivs)
            .enumerate()
            .filter(|&(j, (p, _))| j != i && p.r < x.r)
            .map(|(_, (_, iv))| iv)
            .collect();
        let mut cuts = vec![ivx.lo, ivx.hi];
        for b in &blockers {
            for e in [b.lo, b.hi] {
                if e > ivx.lo && e < ivx.hi {
                    cuts.push(e);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let uncovered = cuts.windows(2).any(|w| {
            w[1] - w[0] > cfg.ang_eps && {
                let mid = 0.5 * (w[0] + w[1]);
                blockers.iter().all(|b| mid < b.lo || mid > b.hi)
            }
        });
        if uncovered {
            out.push(i);
        }
    }
    out
}

/// A reusable Monte Carlo draw set from a density, with precomputed
/// visibility intervals.
pub struct DrawSet {
    pub pts: Vec<PolarPoint>,
    pub ivs: Vec<AngularInterval>,
}

pub fn draw_set(d: &SpatialDensity, n: usize, seed: u64, cfg: &SceneConfig) -> DrawSet {
    let mut r = rng(seed);
    let pts = d.sample(n, &mut r).unwrap();
    let ivs = pts
        .iter()
        .map(|p| visibility_interval(p, cfg).unwrap())
        .collect();
    DrawSet { pts, ivs }
}

/// Predicate-level Monte Carlo estimate of `p1(x)`: the fraction of draws
/// that are strictly nearer and completely block `x`. Returns the estimate
/// and its binomial standard error.
pub fn mc_p1(x: &PolarPoint, ds: &DrawSet, cfg: &SceneConfig) -> (f64, f64) {
    let ivx = visibility_interval(x, cfg).unwrap();
    let hits = ds
        .pts
        .iter()
        .zip(&ds.ivs)
        .filter(|(y, ivy)| y.r < x.r && is_complete_1_blockage(&ivx, ivy, cfg.ang_eps))
        .count();
    let n = ds.pts.len() as f64;
    let p = hits as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Predicate-level Monte Carlo estimate of `p2(x)` over disjoint consecutive
/// draw pairs: the fraction of nearer pairs that simultaneously block `x`.
pub fn mc_p2(x: &PolarPoint, ds: &DrawSet, cfg: &SceneConfig) -> (f64, f64) {
    let ivx = visibility_interval(x, cfg).unwrap();
    let mut hits = 0usize;
    let pairs = ds.pts.len() / 2;
    for i in 0..pairs {
        let (y, z) = (&ds.pts[2 * i], &ds.pts[2 * i + 1]);
        if y.r < x.r
            && z.r < x.r
            && is_simultaneous_2_blockage(&ivx, &ds.ivs[2 * i], &ds.ivs[2 * i + 1], cfg.ang_eps)
        {
            hits += 1;
        }
    }
    let n = pairs as f64;
    let p = hits as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Deterministic probe points with `r >= 1` for oracle comparisons.
pub fn probe_points(cfg: &SceneConfig, count: usize, seed: u64) -> Vec<PolarPoint> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| agent_with_min_r(cfg, 1.0, &mut r))
        .collect()
}
