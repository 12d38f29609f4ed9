//! Randomized property suites over the occlusion geometry, runnable on
//! demand (the CLI `validate` command) or from the test harness.
//!
//! Sampling is targeted: blockers are drawn with azimuths concentrated
//! around the agent under test so that blockage predicates fire at a useful
//! rate instead of being vacuously false for almost every uniform draw.
//!
//! The suites accept an optional [`Injection`] that deliberately corrupts
//! the radial-order predicate inside the suite's independent visibility
//! re-implementation. The corrupted run must fail with concrete
//! counterexamples; this is a self-test that the suites can actually detect
//! the class of bug they exist to catch.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    is_complete_1_blockage, is_simultaneous_2_blockage, union_covers, visibility_interval,
    visible_agents, AngularInterval, CrowdRealization, PolarPoint, SceneConfig,
};
use crate::spatial::uniform_point_in_quadrant;

/// Deliberate defect injected into the suite-side re-implementation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Injection {
    /// Treat *farther* agents as blockers instead of nearer ones.
    RadialFlip,
}

/// Outcome of one property suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub samples: u64,
    /// Human-readable descriptions of the first few counterexamples.
    pub counterexamples: Vec<String>,
    pub pass: bool,
}

impl PropertyReport {
    fn new(name: &str, samples: u64, counterexamples: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            samples,
            pass: counterexamples.is_empty(),
            counterexamples,
        }
    }
}

const MAX_COUNTEREXAMPLES: usize = 5;

/// A random agent with `r >= r_min`, area-uniform otherwise.
pub fn agent_with_min_r<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    r_min: f64,
    rng: &mut R,
) -> PolarPoint {
    loop {
        let p = uniform_point_in_quadrant(cfg, rng);
        if p.r >= r_min {
            return p;
        }
    }
}

/// A strictly nearer point whose azimuth is concentrated around the agent's,
/// covering the blockage-boundary region.
pub fn targeted_blocker<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    x: &PolarPoint,
    rng: &mut R,
) -> PolarPoint {
    let r = rng.gen_range(cfg.rho + 0.05..x.r * 0.999);
    let spread = (cfg.rho / x.r).asin() + (cfg.rho / r).asin();
    let theta = x.theta + rng.gen_range(-1.5 * spread..1.5 * spread);
    PolarPoint::new(r, theta)
}

/// Like [`targeted_blocker`] but restricted to one side of the agent's
/// azimuth: `side > 0` draws `theta > x.theta`, `side < 0` the opposite.
pub fn targeted_side_blocker<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    x: &PolarPoint,
    side: i32,
    rng: &mut R,
) -> PolarPoint {
    let r = rng.gen_range(cfg.rho + 0.05..x.r * 0.999);
    let spread = (cfg.rho / x.r).asin() + (cfg.rho / r).asin();
    let off = rng.gen_range(1e-9..1.5 * spread);
    let theta = x.theta + if side > 0 { off } else { -off };
    PolarPoint::new(r, theta)
}

/// A targeted crowd of `k` agents clustered near a random far pivot, with
/// uniform fallbacks for draws that leave the quadrant.
fn targeted_crowd<R: Rng + ?Sized>(cfg: &SceneConfig, k: usize, rng: &mut R) -> CrowdRealization {
    let pivot = agent_with_min_r(cfg, 3.0, rng);
    let mut agents = vec![pivot];
    for _ in 1..k {
        let b = targeted_blocker(cfg, &pivot, rng);
        agents.push(if b.in_quadrant(cfg) {
            b
        } else {
            uniform_point_in_quadrant(cfg, rng)
        });
    }
    CrowdRealization::new(agents, cfg).expect("targeted crowd stays in the quadrant")
}

/// Jointly blocking pairs must have overlapping intervals.
pub fn lemma1_suite(cfg: &SceneConfig, samples: u64, seed: u64) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..samples {
        let x = agent_with_min_r(cfg, 1.0, &mut rng);
        let y = targeted_blocker(cfg, &x, &mut rng);
        let z = targeted_blocker(cfg, &x, &mut rng);
        let ivx = visibility_interval(&x, cfg).unwrap();
        let ivy = visibility_interval(&y, cfg).unwrap();
        let ivz = visibility_interval(&z, cfg).unwrap();
        if is_simultaneous_2_blockage(&ivx, &ivy, &ivz, cfg.ang_eps)
            && !ivy.overlaps(&ivz, cfg.ang_eps)
        {
            push_counterexample(&mut bad, &x, &[y, z], "disjoint pair jointly blocks");
            if bad.len() >= MAX_COUNTEREXAMPLES {
                break;
            }
        }
    }
    PropertyReport::new("pair-overlap (jointly blocking pairs overlap)", samples, bad)
}

/// Two same-side partial blockers never jointly block, and a covering
/// same-side union always contains a single complete blocker.
pub fn lemma2_suite(cfg: &SceneConfig, samples: u64, seed: u64) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for _ in 0..samples {
        let x = agent_with_min_r(cfg, 1.0, &mut rng);
        let side = if rng.gen::<bool>() { 1 } else { -1 };
        let y = targeted_side_blocker(cfg, &x, side, &mut rng);
        let z = targeted_side_blocker(cfg, &x, side, &mut rng);
        let ivx = visibility_interval(&x, cfg).unwrap();
        let ivy = visibility_interval(&y, cfg).unwrap();
        let ivz = visibility_interval(&z, cfg).unwrap();
        let simultaneous = is_simultaneous_2_blockage(&ivx, &ivy, &ivz, cfg.ang_eps);
        let covers = union_covers(&ivx, &mut [ivy, ivz], cfg.ang_eps);
        let single = is_complete_1_blockage(&ivx, &ivy, cfg.ang_eps)
            || is_complete_1_blockage(&ivx, &ivz, cfg.ang_eps);
        if simultaneous || (covers && !single) {
            push_counterexample(&mut bad, &x, &[y, z], "same-side pair evades dominance");
            if bad.len() >= MAX_COUNTEREXAMPLES {
                break;
            }
        }
    }
    PropertyReport::new("same-side dominance (no same-side joint blockage)", samples, bad)
}

/// Radial comparator used by the suite-side re-implementation; the
/// injectable defect lives here.
fn is_blocker(candidate: &PolarPoint, agent: &PolarPoint, injection: Option<Injection>) -> bool {
    match injection {
        Some(Injection::RadialFlip) => candidate.r > agent.r,
        None => candidate.r < agent.r,
    }
}

/// Suite-side visibility: agent `i` is visible iff no single qualifying
/// complete blocker and no qualifying simultaneous pair exists. Independent
/// of the production sweep-line merge.
pub fn predicate_visible(
    crowd: &CrowdRealization,
    cfg: &SceneConfig,
    injection: Option<Injection>,
) -> Vec<usize> {
    let pts = crowd.agents();
    let ivs: Vec<AngularInterval> = pts
        .iter()
        .map(|p| visibility_interval(p, cfg).unwrap())
        .collect();
    let mut out = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        let qualifying: Vec<usize> = (0..pts.len())
            .filter(|&j| j != i && is_blocker(&pts[j], x, injection))
            .collect();
        let single = qualifying
            .iter()
            .any(|&j| is_complete_1_blockage(&ivs[i], &ivs[j], cfg.ang_eps));
        let pair = !single
            && qualifying.iter().enumerate().any(|(a, &j)| {
                qualifying[a + 1..]
                    .iter()
                    .any(|&k| is_simultaneous_2_blockage(&ivs[i], &ivs[j], &ivs[k], cfg.ang_eps))
            });
        if !single && !pair {
            out.push(i);
        }
    }
    out
}

/// Every agent whose interval is covered by qualifying blockers must be
/// explained by a single complete blocker or one simultaneous pair — the
/// impossibility of irreducible 3-or-more blockage. Under a radial flip the
/// width ordering breaks and counterexamples appear.
pub fn triple_blockage_suite(
    cfg: &SceneConfig,
    crowds: u64,
    k: usize,
    seed: u64,
    injection: Option<Injection>,
) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for c in 0..crowds {
        let crowd = targeted_crowd(cfg, k, &mut rng);
        let pts = crowd.agents();
        let ivs: Vec<AngularInterval> = pts
            .iter()
            .map(|p| visibility_interval(p, cfg).unwrap())
            .collect();
        for (i, x) in pts.iter().enumerate() {
            let qualifying: Vec<usize> = (0..pts.len())
                .filter(|&j| j != i && is_blocker(&pts[j], x, injection))
                .collect();
            let mut cover: Vec<AngularInterval> =
                qualifying.iter().map(|&j| ivs[j]).collect();
            if !union_covers(&ivs[i], &mut cover, cfg.ang_eps) {
                continue; // visible; nothing to explain
            }
            let explained = qualifying
                .iter()
                .any(|&j| is_complete_1_blockage(&ivs[i], &ivs[j], cfg.ang_eps))
                || qualifying.iter().enumerate().any(|(a, &j)| {
                    qualifying[a + 1..].iter().any(|&k| {
                        is_simultaneous_2_blockage(&ivs[i], &ivs[j], &ivs[k], cfg.ang_eps)
                    })
                });
            if !explained {
                bad.push(format!(
                    "crowd {c}: agent {i} at (r={:.4}, theta={:.4}) blocked only by 3+ blockers",
                    x.r, x.theta
                ));
                if bad.len() >= MAX_COUNTEREXAMPLES {
                    return PropertyReport::new(
                        "triple-blockage impossibility",
                        crowds,
                        bad,
                    );
                }
            }
        }
    }
    PropertyReport::new("triple-blockage impossibility", crowds, bad)
}

/// The production sweep-line visibility must equal the predicate-level
/// re-implementation on random crowds.
pub fn equivalence_suite(
    cfg: &SceneConfig,
    crowds: u64,
    seed: u64,
    injection: Option<Injection>,
) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for c in 0..crowds {
        let k = rng.gen_range(1..=10usize);
        let crowd = targeted_crowd(cfg, k, &mut rng);
        let swept = visible_agents(&crowd, cfg);
        let oracle = predicate_visible(&crowd, cfg, injection);
        if swept != oracle {
            bad.push(format!(
                "crowd {c} (k={k}): sweep {swept:?} vs predicate oracle {oracle:?}"
            ));
            if bad.len() >= MAX_COUNTEREXAMPLES {
                break;
            }
        }
    }
    PropertyReport::new("sweep vs predicate-oracle equivalence", crowds, bad)
}

fn push_counterexample(
    bad: &mut Vec<String>,
    x: &PolarPoint,
    blockers: &[PolarPoint],
    what: &str,
) {
    let bs: Vec<String> = blockers
        .iter()
        .map(|b| format!("(r={:.4}, theta={:.4})", b.r, b.theta))
        .collect();
    bad.push(format!(
        "{what}: agent (r={:.4}, theta={:.4}), blockers {}",
        x.r,
        x.theta,
        bs.join(", ")
    ));
}

/// Runs every suite with shared sample counts, deriving per-suite seeds.
pub fn run_all(
    cfg: &SceneConfig,
    samples: u64,
    crowds: u64,
    seed: u64,
    injection: Option<Injection>,
) -> Vec<PropertyReport> {
    vec![
        lemma1_suite(cfg, samples, seed ^ 0xA1),
        lemma2_suite(cfg, samples, seed ^ 0xA2),
        triple_blockage_suite(cfg, crowds, 4, seed ^ 0xA3, injection),
        equivalence_suite(cfg, crowds, seed ^ 0xA4, injection),
    ]
}
