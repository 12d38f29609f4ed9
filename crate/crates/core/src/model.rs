//! Analytical blockage-probability model.
//!
//! For an agent at `x`, `p1(x)` is the probability that one independently
//! placed blocker completely occludes it, and `p2(x)` the probability that a
//! specific blocker pair does so jointly. Both are spatial integrals of the
//! prior over blocking regions, evaluated by QMC over a Sobol cloud. They
//! compose into the visibility likelihood `P(V|N, x)` and its spatial
//! average `P(V|N)`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PolarPoint, SceneConfig};
use crate::spatial::{SobolCloud, SpatialDensity};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("crowd size must be at least 1, got {n}")]
    InvalidCrowdSize { n: u32 },
    #[error("blockage field table is malformed at line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("blockage field I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Membership in the complete-blocking region `R1(x)`: a blocker at `y`
/// completely occludes an agent at `x` when `rho <= r_y < r_x` and
/// `|theta_y - theta_x| <= theta_c(r_y)` with
/// `theta_c(r) = atan(rho/r - rho/sqrt(r_x^2 - rho^2))`.
///
/// This is the small-angle analytical region; the exact interval predicate
/// is kept as a test oracle.
pub fn r1_membership(x: &PolarPoint, y: &PolarPoint, cfg: &SceneConfig) -> bool {
    if y.r < cfg.rho || y.r >= x.r {
        return false;
    }
    let tc = (cfg.rho / y.r - cfg.rho / (x.r * x.r - cfg.rho * cfg.rho).sqrt()).atan();
    tc >= 0.0 && (y.theta - x.theta).abs() <= tc
}

/// QMC estimate of `p1(x) = integral of P(y) over R1(x)`, clamped to `[0,1]`.
pub fn compute_p1(x: &PolarPoint, d: &SpatialDensity, cloud: &SobolCloud) -> f64 {
    let dens: Vec<f64> = cloud.points().iter().map(|p| d.density_at(p)).collect();
    compute_p1_cached(x, &dens, cloud)
}

fn compute_p1_cached(x: &PolarPoint, dens: &[f64], cloud: &SobolCloud) -> f64 {
    let cfg = cloud.scene();
    let mut acc = 0.0;
    for (y, &py) in cloud.points().iter().zip(dens) {
        if py > 0.0 && r1_membership(x, y, cfg) {
            acc += py;
        }
    }
    (acc * cloud.weight()).clamp(0.0, 1.0)
}

/// QMC estimate of `p2(x)`, the double integral of `P(y) P(z)` over the
/// pair-blocking region `R2(x)`, clamped to `[0,1]`.
///
/// Candidate blockers are cloud points strictly nearer than `x` whose
/// intervals partially overlap `I_x`. A candidate on the low-angle side
/// covers `[lo_x, g]` with `g` its interval's upper end; a high-angle-side
/// candidate covers `[h, hi_x]`. A cross pair jointly covers `I_x` exactly
/// when `g >= h`, which also forces the two blocker intervals to overlap.
/// Same-side pairs never qualify (the dominant partial blocker nests the
/// others), and ordered pairs are counted twice to match the symmetric
/// product-measure integral.
pub fn compute_p2(x: &PolarPoint, d: &SpatialDensity, cloud: &SobolCloud) -> f64 {
    let dens: Vec<f64> = cloud.points().iter().map(|p| d.density_at(p)).collect();
    compute_p2_cached(x, &dens, cloud)
}

fn compute_p2_cached(x: &PolarPoint, dens: &[f64], cloud: &SobolCloud) -> f64 {
    let cfg = cloud.scene();
    let eps = cfg.ang_eps;
    let half = (cfg.rho / x.r).asin();
    let (lo_x, hi_x) = (x.theta - half, x.theta + half);

    // (coverage endpoint inside I_x, density) for each side
    let mut left: Vec<(f64, f64)> = Vec::new();
    let mut right: Vec<(f64, f64)> = Vec::new();
    for ((y, iv), &py) in cloud
        .points()
        .iter()
        .zip(cloud.intervals())
        .zip(dens)
    {
        if py <= 0.0 || y.r >= x.r {
            continue;
        }
        if y.theta < x.theta {
            // partial: overlaps I_x but does not contain it
            if iv.hi > lo_x + eps && iv.hi < hi_x - eps {
                left.push((iv.hi, py));
            }
        } else if y.theta > x.theta {
            if iv.lo < hi_x - eps && iv.lo > lo_x + eps {
                right.push((iv.lo, py));
            }
        }
        // theta_y == theta_x with r_y < r_x is a complete blocker, not partial
    }
    if left.is_empty() || right.is_empty() {
        return 0.0;
    }

    // For each left candidate with coverage reach g, sum the density of right
    // candidates with start h <= g (measure-zero gap counts as covered).
    right.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let starts: Vec<f64> = right.iter().map(|&(h, _)| h).collect();
    let mut prefix = Vec::with_capacity(right.len() + 1);
    prefix.push(0.0);
    for &(_, pz) in &right {
        prefix.push(prefix.last().unwrap() + pz);
    }

    let mut acc = 0.0;
    for &(g, py) in &left {
        let k = starts.partition_point(|&h| h <= g + eps);
        acc += py * prefix[k];
    }
    let w = cloud.weight();
    (2.0 * acc * w * w).clamp(0.0, 1.0)
}

/// Likelihood that one agent at a point with blockage probabilities
/// `(p1, p2)` is visible in a crowd of `n`, before clamping.
///
/// `(1-p1)^(n-1) + (1-p2)^C(n-1,2) - 1 +
///  sum_{k=1}^{n-3} (-1)^(k+1) C(n-1,k) p1^k (1 - (1-p2)^C(n-k-1,2))`
pub fn visibility_likelihood_raw(n: u32, p1: f64, p2: f64) -> Result<f64, ModelError> {
    if n < 1 {
        return Err(ModelError::InvalidCrowdSize { n });
    }
    let nf = n as f64;
    let pow_1m = |p: f64, e: f64| -> f64 {
        if e == 0.0 {
            1.0
        } else {
            (e * (-p).ln_1p()).exp()
        }
    };
    let choose2 = |m: f64| m * (m - 1.0) / 2.0;

    let mut total = pow_1m(p1, nf - 1.0) + pow_1m(p2, choose2(nf - 1.0)) - 1.0;
    if n >= 4 {
        let mut binom = 1.0; // C(n-1, k) by recurrence
        let mut p1k = 1.0;
        let mut sign = 1.0;
        for k in 1..=(n - 3) {
            let kf = k as f64;
            binom *= (nf - kf) / kf;
            p1k *= p1;
            let tail = 1.0 - pow_1m(p2, choose2(nf - kf - 1.0));
            total += sign * binom * p1k * tail;
            sign = -sign;
        }
    }
    Ok(total)
}

/// `P(V|N, x)` clamped to `[0, 1]`.
pub fn visibility_likelihood(n: u32, p1: f64, p2: f64) -> Result<f64, ModelError> {
    Ok(visibility_likelihood_raw(n, p1, p2)?.clamp(0.0, 1.0))
}

/// Per-cloud-point tabulation of `p1` and `p2` for one scene and prior.
#[derive(Clone, Debug)]
pub struct BlockageField {
    cloud: Arc<SobolCloud>,
    density_values: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl BlockageField {
    /// Evaluates `p1` and `p2` at every cloud point. Parallel over points;
    /// the result is independent of the worker count.
    pub fn build(cloud: Arc<SobolCloud>, density: &SpatialDensity) -> Self {
        let dens: Vec<f64> = cloud.points().iter().map(|p| density.density_at(p)).collect();
        let pairs: Vec<(f64, f64)> = cloud
            .points()
            .par_iter()
            .map(|x| {
                (
                    compute_p1_cached(x, &dens, &cloud),
                    compute_p2_cached(x, &dens, &cloud),
                )
            })
            .collect();
        let (p1, p2) = pairs.into_iter().unzip();
        Self {
            cloud,
            density_values: dens,
            p1,
            p2,
        }
    }

    pub fn cloud(&self) -> &SobolCloud {
        &self.cloud
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    pub fn p2(&self) -> &[f64] {
        &self.p2
    }

    pub fn density_values(&self) -> &[f64] {
        &self.density_values
    }

    /// `P(V|N)`: density-weighted QMC average of the visibility likelihood.
    pub fn expected_visibility(&self, n: u32) -> Result<f64, ModelError> {
        Ok(self.expected_visibility_with_excursion(n)?.0)
    }

    fn expected_visibility_with_excursion(&self, n: u32) -> Result<(f64, f64), ModelError> {
        let mut acc = 0.0;
        let mut excursion: f64 = 0.0;
        for i in 0..self.p1.len() {
            if self.density_values[i] <= 0.0 {
                continue;
            }
            let raw = visibility_likelihood_raw(n, self.p1[i], self.p2[i])?;
            let clamped = raw.clamp(0.0, 1.0);
            excursion = excursion.max((raw - clamped).abs());
            acc += self.density_values[i] * clamped;
        }
        Ok(((acc * self.cloud.weight()).clamp(0.0, 1.0), excursion))
    }

    /// Expected visibility for every `N` in `1..=n_max`.
    pub fn visibility_curve(&self, n_max: u32) -> Result<VisibilityCurve, ModelError> {
        let mut values = Vec::with_capacity(n_max as usize);
        let mut max_excursion: f64 = 0.0;
        for n in 1..=n_max {
            let (v, e) = self.expected_visibility_with_excursion(n)?;
            max_excursion = max_excursion.max(e);
            values.push(v);
        }
        if max_excursion > 0.0 {
            log::debug!(
                "visibility likelihood clamped; max excursion {max_excursion:.3e} up to N={n_max}"
            );
        }
        Ok(VisibilityCurve {
            values,
            max_excursion,
        })
    }

    /// Writes the portable `r,theta,p1,p2` table (17 significant digits).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        writeln!(w, "r,theta,p1,p2")?;
        for (i, p) in self.cloud.points().iter().enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.r, p.theta, self.p1[i], self.p2[i]
            )?;
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv) back onto a
    /// cloud of the same shape, re-evaluating only the density values.
    pub fn read_csv<R: BufRead>(
        cloud: Arc<SobolCloud>,
        density: &SpatialDensity,
        reader: R,
    ) -> Result<Self, ModelError> {
        let mut p1 = Vec::with_capacity(cloud.len());
        let mut p2 = Vec::with_capacity(cloud.len());
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            let idx = lineno - 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(ModelError::MalformedTable {
                    line: lineno + 1,
                    reason: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64, ModelError> {
                s.trim().parse().map_err(|_| ModelError::MalformedTable {
                    line: lineno + 1,
                    reason: format!("bad number {s:?}"),
                })
            };
            let (r, theta) = (parse(fields[0])?, parse(fields[1])?);
            let point = cloud
                .points()
                .get(idx)
                .ok_or_else(|| ModelError::MalformedTable {
                    line: lineno + 1,
                    reason: "more rows than cloud points".into(),
                })?;
            if (r - point.r).abs() > 1e-9 || (theta - point.theta).abs() > 1e-9 {
                return Err(ModelError::MalformedTable {
                    line: lineno + 1,
                    reason: "row does not match cloud point".into(),
                });
            }
            p1.push(parse(fields[2])?);
            p2.push(parse(fields[3])?);
        }
        if p1.len() != cloud.len() {
            return Err(ModelError::MalformedTable {
                line: p1.len() + 1,
                reason: format!("expected {} rows, got {}", cloud.len(), p1.len()),
            });
        }
        let density_values = cloud.points().iter().map(|p| density.density_at(p)).collect();
        Ok(Self {
            cloud,
            density_values,
            p1,
            p2,
        })
    }
}

/// Expected visibility `P(V|N)` for `N = 1..=n_max` (index `N-1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCurve {
    pub values: Vec<f64>,
    /// Largest out-of-`[0,1]` excursion of the unclamped likelihood seen
    /// while building the curve; a diagnostic of the series approximation.
    pub max_excursion: f64,
}

impl VisibilityCurve {
    /// `P(V|N)`; panics if `n` is outside `1..=n_max`.
    pub fn at(&self, n: u32) -> f64 {
        self.values[(n - 1) as usize]
    }

    pub fn n_max(&self) -> u32 {
        self.values.len() as u32
    }
}
