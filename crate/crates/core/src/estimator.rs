//! Crowd-size inference from visible-agent counts.
//!
//! The analytical model for the number of visible agents in a crowd of `N`
//! is `Binomial(N, P(V|N))`. The estimate is the candidate `N` whose
//! binomial PMF minimizes the KL divergence from the empirical histogram of
//! observed counts, with infinite divergence acting as a hard support
//! constraint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::VisibilityCurve;

/// KL divergences are legitimately `+inf` when a candidate's support cannot
/// produce the observations, but JSON has no infinity literal. These codecs
/// write non-finite entries as `null` and parse `null` back as `+inf`, so
/// serialized results stay valid JSON and round-trip losslessly.
pub mod kl_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mapped: Vec<Option<f64>> = v.iter().map(|&x| x.is_finite().then_some(x)).collect();
        mapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

/// [`kl_vec`] lifted over `Option<Vec<f64>>` for optional baseline columns.
pub mod kl_vec_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let mapped: Option<Vec<Option<f64>>> = v
            .as_ref()
            .map(|v| v.iter().map(|&x| x.is_finite().then_some(x)).collect());
        mapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        let raw: Option<Vec<Option<f64>>> = Option::deserialize(d)?;
        Ok(raw.map(|v| {
            v.into_iter()
                .map(|x| x.unwrap_or(f64::INFINITY))
                .collect()
        }))
    }
}

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("crowd size must be at least 1, got {n}")]
    InvalidCrowdSize { n: u32 },
    #[error("success probability {p} outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("empty observation list")]
    NoObservations,
    #[error("observation {value} exceeds n_max={n_max}")]
    ObservationOutOfRange { value: u32, n_max: u32 },
    #[error("visibility curve covers 1..={curve}, need 1..={n_max}")]
    CurveTooShort { curve: u32, n_max: u32 },
    #[error("every candidate has infinite divergence (empirical support exceeds all candidates)")]
    NoFiniteCandidate,
}

/// Where a PMF came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytical { n: u32 },
    Empirical { samples: usize },
}

/// A distribution over the number of visible agents, on support
/// `0..mass.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisiblePmf {
    pub mass: Vec<f64>,
    pub provenance: Provenance,
}

impl VisiblePmf {
    /// Largest support value (`mass.len() - 1`).
    pub fn max_support(&self) -> u32 {
        (self.mass.len() - 1) as u32
    }

    /// Mass at `n`, zero beyond the stored support.
    pub fn at(&self, n: u32) -> f64 {
        self.mass.get(n as usize).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(n, &m)| n as f64 * m)
            .sum()
    }

    /// Total variation distance to another PMF.
    pub fn total_variation(&self, other: &VisiblePmf) -> f64 {
        let len = self.mass.len().max(other.mass.len()) as u32;
        0.5 * (0..len)
            .map(|n| (self.at(n) - other.at(n)).abs())
            .sum::<f64>()
    }
}

/// `Binomial(n, pv)` over `0..=n`, computed in log space.
pub fn analytical_pmf(n: u32, pv: f64) -> Result<VisiblePmf, EstimatorError> {
    if n < 1 {
        return Err(EstimatorError::InvalidCrowdSize { n });
    }
    if !(0.0..=1.0).contains(&pv) {
        return Err(EstimatorError::InvalidProbability { p: pv });
    }
    let mass = if pv == 0.0 {
        let mut m = vec![0.0; n as usize + 1];
        m[0] = 1.0;
        m
    } else if pv == 1.0 {
        let mut m = vec![0.0; n as usize + 1];
        m[n as usize] = 1.0;
        m
    } else {
        // ln C(n,k) via cumulative ln-factorials
        let mut ln_fact = vec![0.0f64; n as usize + 1];
        for k in 1..=n as usize {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let (lp, lq) = (pv.ln(), (-pv).ln_1p());
        (0..=n as usize)
            .map(|k| {
                let ln_c = ln_fact[n as usize] - ln_fact[k] - ln_fact[n as usize - k];
                (ln_c + k as f64 * lp + (n as usize - k) as f64 * lq).exp()
            })
            .collect()
    };
    Ok(VisiblePmf {
        mass,
        provenance: Provenance::Analytical { n },
    })
}

/// Normalized histogram of observed visible-agent counts over `0..=n_max`.
pub fn empirical_pmf(counts: &[u32], n_max: u32) -> Result<VisiblePmf, EstimatorError> {
    if counts.is_empty() {
        return Err(EstimatorError::NoObservations);
    }
    let mut hist = vec![0.0f64; n_max as usize + 1];
    for &c in counts {
        if c > n_max {
            return Err(EstimatorError::ObservationOutOfRange { value: c, n_max });
        }
        hist[c as usize] += 1.0;
    }
    let total = counts.len() as f64;
    for h in &mut hist {
        *h /= total;
    }
    Ok(VisiblePmf {
        mass: hist,
        provenance: Provenance::Empirical {
            samples: counts.len(),
        },
    })
}

/// `D_KL(pe || pa)` in nats, with `0 log(0/q) = 0` and `+inf` where the
/// empirical distribution has mass the analytical one forbids.
pub fn kl_divergence(pe: &VisiblePmf, pa: &VisiblePmf) -> f64 {
    let len = pe.mass.len().max(pa.mass.len()) as u32;
    let mut kl = 0.0;
    for n in 0..len {
        let p = pe.at(n);
        if p <= 0.0 {
            continue;
        }
        let q = pa.at(n);
        if q <= 0.0 {
            return f64::INFINITY;
        }
        kl += p * (p / q).ln();
    }
    kl.max(0.0) // guard tiny negative rounding when pe == pa
}

/// Result of a crowd-size estimation: the argmin and the full per-candidate
/// divergence vector (index `N-1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub n_star: u32,
    #[serde(with = "kl_vec")]
    pub kl_by_n: Vec<f64>,
}

/// Minimizes `D_KL(pe || Binomial(N, curve[N]))` over `N in 1..=n_max`.
/// Ties break toward the smaller candidate.
pub fn estimate_crowd_size(
    pe: &VisiblePmf,
    curve: &VisibilityCurve,
    n_max: u32,
) -> Result<EstimationResult, EstimatorError> {
    if curve.n_max() < n_max {
        return Err(EstimatorError::CurveTooShort {
            curve: curve.n_max(),
            n_max,
        });
    }
    let mut kl_by_n = Vec::with_capacity(n_max as usize);
    let mut best: Option<(u32, f64)> = None;
    for n in 1..=n_max {
        let pa = analytical_pmf(n, curve.at(n))?;
        let kl = kl_divergence(pe, &pa);
        kl_by_n.push(kl);
        if kl.is_finite() && best.map_or(true, |(_, b)| kl < b) {
            best = Some((n, kl));
        }
    }
    match best {
        Some((n_star, _)) => Ok(EstimationResult { n_star, kl_by_n }),
        None => Err(EstimatorError::NoFiniteCandidate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VisibilityCurve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytical_point_mass_at_pv_one() {
        let pmf = analytical_pmf(5, 1.0).unwrap();
        assert_eq!(pmf.mass, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn analytical_half_matches_hand_values() {
        let pmf = analytical_pmf(2, 0.5).unwrap();
        for (got, want) in pmf.mass.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn analytical_mean_is_n_times_p() {
        let pmf = analytical_pmf(30, 0.7).unwrap();
        assert!((pmf.mean() - 21.0).abs() < 1e-9);
        let sum: f64 = pmf.mass.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn analytical_rejects_bad_args() {
        assert!(analytical_pmf(0, 0.5).is_err());
        assert!(analytical_pmf(5, 1.5).is_err());
    }

    #[test]
    fn empirical_point_mass_and_split() {
        let pmf = empirical_pmf(&[3, 3, 3], 5).unwrap();
        assert_eq!(pmf.at(3), 1.0);
        let pmf = empirical_pmf(&[1, 2, 1, 2], 5).unwrap();
        assert_eq!(pmf.at(1), 0.5);
        assert_eq!(pmf.at(2), 0.5);
        assert_eq!(pmf.at(0), 0.0);
    }

    #[test]
    fn empirical_rejects_out_of_range() {
        assert!(matches!(
            empirical_pmf(&[2, 7], 5),
            Err(EstimatorError::ObservationOutOfRange { value: 7, .. })
        ));
        assert!(empirical_pmf(&[], 5).is_err());
    }

    #[test]
    fn empirical_concentrates_around_truth() {
        // 10,000 binomial draws: TV distance to the generating binomial < 0.03
        let truth = analytical_pmf(20, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let counts: Vec<u32> = (0..10_000)
            .map(|_| (0..20).filter(|_| rng.gen::<f64>() < 0.8).count() as u32)
            .collect();
        let emp = empirical_pmf(&counts, 20).unwrap();
        assert!(emp.total_variation(&truth) < 0.03);
    }

    #[test]
    fn kl_zero_iff_equal() {
        let a = analytical_pmf(10, 0.6).unwrap();
        assert_eq!(kl_divergence(&a, &a), 0.0);
        let b = analytical_pmf(10, 0.61).unwrap();
        assert!(kl_divergence(&a, &b) > 0.0);
    }

    #[test]
    fn kl_infinite_outside_support() {
        let pe = empirical_pmf(&[7], 10).unwrap();
        let pa = analytical_pmf(5, 0.6).unwrap();
        assert!(kl_divergence(&pe, &pa).is_infinite());
    }

    #[test]
    fn kl_hand_computed_value() {
        let pe = VisiblePmf {
            mass: vec![0.5, 0.5],
            provenance: Provenance::Empirical { samples: 2 },
        };
        let pa = VisiblePmf {
            mass: vec![0.25, 0.75],
            provenance: Provenance::Analytical { n: 1 },
        };
        let expect = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        let got = kl_divergence(&pe, &pa);
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.1438).abs() < 1e-4);
    }

    fn test_curve(n_max: u32) -> VisibilityCurve {
        // smooth decreasing synthetic curve
        VisibilityCurve {
            values: (1..=n_max).map(|n| 0.97f64.powi(n as i32 - 1)).collect(),
            max_excursion: 0.0,
        }
    }

    #[test]
    fn self_consistency_recovers_every_n() {
        let curve = test_curve(30);
        for n in 1..=30 {
            let pe = analytical_pmf(n, curve.at(n)).unwrap();
            let res = estimate_crowd_size(&pe, &curve, 30).unwrap();
            assert_eq!(res.n_star, n, "failed at N={n}");
            assert!(res.kl_by_n[(n - 1) as usize] < 1e-12);
        }
    }

    #[test]
    fn single_agent_point_mass_estimates_one() {
        let mut curve = test_curve(10);
        curve.values[0] = 1.0;
        let pe = empirical_pmf(&[1, 1, 1, 1], 10).unwrap();
        let res = estimate_crowd_size(&pe, &curve, 10).unwrap();
        assert_eq!(res.n_star, 1);
    }

    #[test]
    fn candidates_below_observed_max_get_infinity() {
        let curve = test_curve(30);
        let counts: Vec<u32> = vec![12, 13, 14, 12, 13];
        let pe = empirical_pmf(&counts, 30).unwrap();
        let res = estimate_crowd_size(&pe, &curve, 30).unwrap();
        for n in 1..14u32 {
            assert!(res.kl_by_n[(n - 1) as usize].is_infinite());
        }
        assert!(res.n_star >= 14);
    }

    #[test]
    fn all_infinite_is_an_error() {
        let curve = test_curve(5);
        let pe = empirical_pmf(&[9], 9).unwrap();
        assert!(matches!(
            estimate_crowd_size(&pe, &curve, 5),
            Err(EstimatorError::NoFiniteCandidate)
        ));
    }

    #[test]
    fn estimation_is_deterministic() {
        let curve = test_curve(30);
        let pe = empirical_pmf(&[10, 11, 12, 10, 11], 30).unwrap();
        let a = estimate_crowd_size(&pe, &curve, 30).unwrap();
        let b = estimate_crowd_size(&pe, &curve, 30).unwrap();
        assert_eq!(a, b);
    }
}
