//! Angular-interval occlusion primitives.
//!
//! An agent is a disc of radius `rho` whose center lives in the quadrant
//! `Q = {(r, theta) | rho <= r <= r_max, 0 <= theta <= pi/2}` with the radar
//! at the origin. The disc subtends an angular interval at the origin; all
//! blockage predicates and the per-realization visibility computation are
//! expressed in terms of these intervals.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default endpoint tolerance for interval comparisons (radians).
pub const DEFAULT_ANG_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid scene: rho={rho}, r_max={r_max} (need 0 < rho < r_max)")]
    InvalidScene { rho: f64, r_max: f64 },
    #[error("point (r={r}, theta={theta}) outside quadrant [{rho}, {r_max}] x [0, pi/2]")]
    OutsideQuadrant {
        r: f64,
        theta: f64,
        rho: f64,
        r_max: f64,
    },
    #[error("visibility interval undefined for r={r} < rho={rho}")]
    RadiusBelowDiscRadius { r: f64, rho: f64 },
    #[error("crowd realization must contain at least one agent")]
    EmptyCrowd,
}

/// Scene parameters: disc radius, field-of-view outer radius, and the
/// endpoint tolerance used by all interval predicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Agent disc radius (meters).
    pub rho: f64,
    /// Field-of-view outer radius (meters).
    pub r_max: f64,
    /// Endpoint tolerance for interval comparisons (radians).
    #[serde(default = "default_ang_eps")]
    pub ang_eps: f64,
}

fn default_ang_eps() -> f64 {
    DEFAULT_ANG_EPS
}

impl SceneConfig {
    pub fn new(rho: f64, r_max: f64) -> Result<Self, GeometryError> {
        if !(rho > 0.0 && rho < r_max && r_max.is_finite()) {
            return Err(GeometryError::InvalidScene { rho, r_max });
        }
        Ok(Self {
            rho,
            r_max,
            ang_eps: DEFAULT_ANG_EPS,
        })
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.rho > 0.0 && self.rho < self.r_max && self.r_max.is_finite()) {
            return Err(GeometryError::InvalidScene {
                rho: self.rho,
                r_max: self.r_max,
            });
        }
        Ok(())
    }

    /// Area of the annular quadrant `Q`: `(pi/4) (r_max^2 - rho^2)`.
    pub fn quadrant_area(&self) -> f64 {
        std::f64::consts::FRAC_PI_4 * (self.r_max * self.r_max - self.rho * self.rho)
    }
}

/// A point in radar-centric polar coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    /// Radial distance from the radar (meters).
    pub r: f64,
    /// Azimuth (radians).
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    pub fn in_quadrant(&self, cfg: &SceneConfig) -> bool {
        self.r >= cfg.rho
            && self.r <= cfg.r_max
            && self.theta >= 0.0
            && self.theta <= FRAC_PI_2
    }

    /// Cartesian coordinates `(r cos theta, r sin theta)`.
    pub fn to_cartesian(&self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// A closed interval of angles `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngularInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `other` is a subset of `self` (closed-interval, within `eps`).
    pub fn contains_interval(&self, other: &AngularInterval, eps: f64) -> bool {
        self.lo <= other.lo + eps && other.hi <= self.hi + eps
    }

    /// Intersection is non-empty (closed-interval, within `eps`).
    pub fn overlaps(&self, other: &AngularInterval, eps: f64) -> bool {
        self.lo.max(other.lo) <= self.hi.min(other.hi) + eps
    }

    /// Intersection, or `None` when disjoint.
    pub fn intersect(&self, other: &AngularInterval) -> Option<AngularInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(AngularInterval { lo, hi })
    }
}

/// The angular interval subtended at the origin by the disc centered at `p`:
/// `[theta - asin(rho/r), theta + asin(rho/r)]`. No clipping to the quadrant;
/// an agent near an edge still casts its full shadow.
pub fn visibility_interval(
    p: &PolarPoint,
    cfg: &SceneConfig,
) -> Result<AngularInterval, GeometryError> {
    if p.r < cfg.rho {
        return Err(GeometryError::RadiusBelowDiscRadius {
            r: p.r,
            rho: cfg.rho,
        });
    }
    let half = (cfg.rho / p.r).asin();
    Ok(AngularInterval::new(p.theta - half, p.theta + half))
}

/// Complete 1-Blockage: `a` is entirely contained in `b` (subset-or-equal).
pub fn is_complete_1_blockage(a: &AngularInterval, b: &AngularInterval, eps: f64) -> bool {
    b.contains_interval(a, eps)
}

/// Partial 1-Blockage: the overlap `G = a ∩ b` is non-empty and a strict
/// subset of `a`.
pub fn is_partial_1_blockage(a: &AngularInterval, b: &AngularInterval, eps: f64) -> bool {
    a.overlaps(b, eps) && !is_complete_1_blockage(a, b, eps)
}

/// Simultaneous 2-Blockage: `b1 ∪ b2` covers `a` with no interior gap, while
/// neither `b1` nor `b2` alone contains `a`. A disjoint pair leaves a gap
/// inside `a` and therefore never qualifies.
pub fn is_simultaneous_2_blockage(
    a: &AngularInterval,
    b1: &AngularInterval,
    b2: &AngularInterval,
    eps: f64,
) -> bool {
    if is_complete_1_blockage(a, b1, eps) || is_complete_1_blockage(a, b2, eps) {
        return false;
    }
    union_covers(a, &mut [*b1, *b2], eps)
}

/// Whether the union of `intervals` covers `a` up to gaps of measure <= `eps`.
/// Sorts `intervals` by `lo` in place and sweeps left to right.
pub fn union_covers(a: &AngularInterval, intervals: &mut [AngularInterval], eps: f64) -> bool {
    intervals.sort_unstable_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut reach = a.lo;
    for iv in intervals.iter() {
        if iv.lo > reach + eps {
            return false; // gap of positive measure
        }
        if iv.hi > reach {
            reach = iv.hi;
        }
        if reach >= a.hi - eps {
            return true;
        }
    }
    reach >= a.hi - eps
}

/// Total measure of `a` left uncovered by the union of `intervals`.
pub fn uncovered_measure(a: &AngularInterval, intervals: &mut [AngularInterval]) -> f64 {
    intervals.sort_unstable_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut reach = a.lo;
    let mut uncovered = 0.0;
    for iv in intervals.iter() {
        if iv.lo > reach {
            uncovered += (iv.lo.min(a.hi) - reach).max(0.0);
        }
        if iv.hi > reach {
            reach = iv.hi;
        }
        if reach >= a.hi {
            return uncovered;
        }
    }
    uncovered + (a.hi - reach).max(0.0)
}

/// One crowd snapshot: an ordered list of agent centers inside `Q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrowdRealization {
    agents: Vec<PolarPoint>,
}

impl CrowdRealization {
    pub fn new(agents: Vec<PolarPoint>, cfg: &SceneConfig) -> Result<Self, GeometryError> {
        if agents.is_empty() {
            return Err(GeometryError::EmptyCrowd);
        }
        for a in &agents {
            if !a.in_quadrant(cfg) {
                return Err(GeometryError::OutsideQuadrant {
                    r: a.r,
                    theta: a.theta,
                    rho: cfg.rho,
                    r_max: cfg.r_max,
                });
            }
        }
        Ok(Self { agents })
    }

    pub fn agents(&self) -> &[PolarPoint] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// Indices of visible agents, ascending. Agent `i` is visible iff its
/// interval is not fully covered by the union of the intervals of strictly
/// nearer agents. Exact radial ties block neither way.
pub fn visible_agents(crowd: &CrowdRealization, cfg: &SceneConfig) -> Vec<usize> {
    let agents = crowd.agents();
    let intervals: Vec<AngularInterval> = agents
        .iter()
        .map(|p| visibility_interval(p, cfg).expect("agent inside Q"))
        .collect();

    let mut visible = Vec::with_capacity(agents.len());
    let mut nearer = Vec::with_capacity(agents.len());
    for (i, target) in intervals.iter().enumerate() {
        nearer.clear();
        for (j, iv) in intervals.iter().enumerate() {
            if agents[j].r < agents[i].r && iv.overlaps(target, cfg.ang_eps) {
                nearer.push(*iv);
            }
        }
        if nearer.is_empty() || !union_covers(target, &mut nearer, cfg.ang_eps) {
            visible.push(i);
        }
    }
    visible
}

/// Number of visible agents `N_v`.
pub fn count_visible(crowd: &CrowdRealization, cfg: &SceneConfig) -> usize {
    visible_agents(crowd, cfg).len()
}

/// How a blocked agent's occlusion is explained, for the realization audit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockageExplanation {
    SingleComplete { blocker: usize },
    OppositeSidePair { left: usize, right: usize },
}

/// For every blocked agent, search for a single complete blocker or an
/// opposite-side overlapping pair that covers its interval. Returns the first
/// blocked agent with no such explanation, if any. By the impossibility of
/// simultaneous 3-blockages among strictly nearer (hence wider-interval)
/// blockers, this should never return `Some`.
pub fn audit_blockage_explanations(
    crowd: &CrowdRealization,
    cfg: &SceneConfig,
) -> Option<usize> {
    let agents = crowd.agents();
    let intervals: Vec<AngularInterval> = agents
        .iter()
        .map(|p| visibility_interval(p, cfg).expect("agent inside Q"))
        .collect();
    let visible = visible_agents(crowd, cfg);

    'agents: for i in 0..agents.len() {
        if visible.binary_search(&i).is_ok() {
            continue;
        }
        let target = &intervals[i];
        let nearer: Vec<usize> = (0..agents.len())
            .filter(|&j| agents[j].r < agents[i].r)
            .collect();
        for &j in &nearer {
            if is_complete_1_blockage(target, &intervals[j], cfg.ang_eps) {
                continue 'agents;
            }
        }
        for &j in &nearer {
            for &k in &nearer {
                if j >= k {
                    continue;
                }
                let (a, b) = (&intervals[j], &intervals[k]);
                let opposite = (agents[j].theta - agents[i].theta)
                    * (agents[k].theta - agents[i].theta)
                    < 0.0;
                if opposite
                    && a.overlaps(b, cfg.ang_eps)
                    && is_simultaneous_2_blockage(target, a, b, cfg.ang_eps)
                {
                    continue 'agents;
                }
            }
        }
        return Some(i);
    }
    None
}
