//! Dominability of an `M`-indexed family of bounded initial laws `Z_0(M)`:
//!
//! ```text
//! E(Z_0^k m^Z_0) <= M^(k-3) (theta(M) + k!),                  k >= 3,
//! theta(n v M) prod_{i<n} E(m^Z_i)^(m-1) <= gamma (n v M)^2,   n >= 1.
//! ```

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::n_or_m;
use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveConfig};
use crate::families::{tail_constant, theta_constant, truncate_initial, TruncationMode};
use crate::law::{ModelParams, TiltedLaw};

/// A family `M -> (Z_0(M), theta(M))`.
pub trait DominableFamily: Sync {
    fn params(&self) -> ModelParams;
    fn build(&self, big_m: usize) -> Result<TiltedLaw>;
    fn theta(&self, big_m: usize) -> Result<f64>;
}

/// Truncations `Z_0 = Y_0 1{Y_0 <= a(M)}` of a fixed critical law.
#[derive(Clone, Debug)]
pub struct TruncationFamily {
    y0: TiltedLaw,
    mode: TruncationMode,
    c30: f64,
}

/// Cut at `M`, `theta(M) = c30 M^(4-alpha)`.
pub fn stable_builder(y0: TiltedLaw, alpha: f64) -> TruncationFamily {
    let c30 = theta_constant(tail_constant(&y0, alpha), alpha);
    TruncationFamily {
        y0,
        mode: TruncationMode::Stable { alpha },
        c30,
    }
}

/// Cut at `M zeta(M)`, `theta = max(E(Y^3 m^Y), 1)`.
pub fn finite_variance_builder(y0: TiltedLaw) -> TruncationFamily {
    TruncationFamily {
        y0,
        mode: TruncationMode::FiniteVariance,
        c30: 0.0,
    }
}

impl DominableFamily for TruncationFamily {
    fn params(&self) -> ModelParams {
        self.y0.params()
    }

    fn build(&self, big_m: usize) -> Result<TiltedLaw> {
        Ok(truncate_initial(&self.y0, big_m, self.mode)?.law)
    }

    fn theta(&self, big_m: usize) -> Result<f64> {
        Ok(match self.mode {
            TruncationMode::Stable { alpha } => self.c30 * (big_m as f64).powf(4.0 - alpha),
            TruncationMode::FiniteVariance => self.y0.tilted_moment(3).max(1.0),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominabilityRow {
    pub big_m: usize,
    pub theta: f64,
    /// `max_k E(Z_0^k m^Z_0) / (M^(k-3) (theta(M) + k!))`.
    pub cond21_ratio: f64,
    pub worst_k: usize,
    /// `max_n theta(n v M) Pi_n / (n v M)^2`.
    pub gamma: f64,
    pub support_max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominabilityPass {
    pub cond21: bool,
    pub cond22: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominabilityCertificate {
    pub m_list: Vec<usize>,
    pub theta: BTreeMap<usize, f64>,
    /// Smallest `gamma` making the product condition hold on every tested
    /// `(n, M)`.
    pub gamma_fitted: f64,
    pub cond21_max_ratio: f64,
    pub k_max: usize,
    pub n_max: usize,
    /// Smallest tested `M` from which the moment condition holds for every
    /// larger tested `M`.
    pub m0: Option<usize>,
    pub rows: Vec<DominabilityRow>,
    pub pass: DominabilityPass,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub fn check_dominability<F: DominableFamily>(
    family: &F,
    m_list: &[usize],
    config: &EvolveConfig,
    k_max: usize,
) -> Result<DominabilityCertificate> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) || m_list[0] < 1 {
        return Err(Error::InvalidParameter(
            "M list must be non-empty, positive and strictly increasing".into(),
        ));
    }
    if k_max < 3 {
        return Err(Error::InvalidParameter(format!("k_max must be >= 3, got {k_max}")));
    }
    let n_max = config.n_max;

    // theta at every argument the two conditions use, checked for monotonicity
    let mut args: Vec<usize> = m_list.to_vec();
    args.extend(m_list[0] + 1..=n_max);
    args.sort_unstable();
    args.dedup();
    let mut thetas = BTreeMap::new();
    for &a in &args {
        thetas.insert(a, family.theta(a)?);
    }
    let mut prev: Option<(usize, f64)> = None;
    for (&a, &t) in &thetas {
        if let Some((pa, pt)) = prev {
            if t < pt {
                return Err(Error::ThetaNotMonotone {
                    m_lo: pa as u64,
                    theta_lo: pt,
                    m_hi: a as u64,
                    theta_hi: t,
                });
            }
        }
        prev = Some((a, t));
    }

    let rows: Vec<DominabilityRow> = m_list
        .par_iter()
        .map(|&big_m| -> Result<DominabilityRow> {
            let z0 = family.build(big_m)?;
            let theta = thetas[&big_m];
            let mf = big_m as f64;
            let (worst_k, cond21_ratio) = (3..=k_max)
                .map(|k| {
                    let lhs = z0.tilted_moment(k as u32);
                    let rhs = mf.powi(k as i32 - 3) * (theta + factorial(k));
                    (k, lhs / rhs)
                })
                .fold((3, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let trace = evolve(&z0, config, format!("Z_0(M={big_m})"))?;
            let gamma = trace
                .records
                .iter()
                .skip(1)
                .map(|r| {
                    let nm = r.n.max(big_m);
                    thetas[&nm] * r.log_pi.exp() / (n_or_m(r.n, big_m) * n_or_m(r.n, big_m))
                })
                .fold(0.0, f64::max);
            Ok(DominabilityRow {
                big_m,
                theta,
                cond21_ratio,
                worst_k,
                gamma,
                support_max: z0.support_max(),
            })
        })
        .collect::<Result<_>>()?;

    let cond21_max_ratio = rows.iter().map(|r| r.cond21_ratio).fold(0.0, f64::max);
    let gamma_fitted = rows.iter().map(|r| r.gamma).fold(0.0, f64::max);
    let m0 = match rows.iter().rposition(|r| r.cond21_ratio > 1.0) {
        None => Some(rows[0].big_m),
        Some(i) => rows.get(i + 1).map(|r| r.big_m),
    };
    Ok(DominabilityCertificate {
        m_list: m_list.to_vec(),
        theta: m_list.iter().map(|&a| (a, thetas[&a])).collect(),
        gamma_fitted,
        cond21_max_ratio,
        k_max,
        n_max,
        m0,
        rows,
        pass: DominabilityPass {
            cond21: cond21_max_ratio <= 1.0,
            cond22: gamma_fitted > 0.0 && gamma_fitted.is_finite(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::two_point_critical;

    struct Fixed {
        law: TiltedLaw,
        theta: fn(usize) -> f64,
    }

    impl DominableFamily for Fixed {
        fn params(&self) -> ModelParams {
            self.law.params()
        }
        fn build(&self, _: usize) -> Result<TiltedLaw> {
            Ok(self.law.clone())
        }
        fn theta(&self, big_m: usize) -> Result<f64> {
            Ok((self.theta)(big_m))
        }
    }

    fn m2() -> ModelParams {
        ModelParams::new(2).unwrap()
    }

    #[test]
    fn bounded_law_with_cubic_theta_passes_moment_condition() {
        let law = two_point_critical(2, m2()).unwrap();
        let fam = finite_variance_builder(law.clone());
        let cert = check_dominability(&fam, &[4, 8, 16], &EvolveConfig::with_n_max(32), 8).unwrap();
        let theta = law.tilted_moment(3).max(1.0);
        // k = 3 at M = 4: E(Z^3 m^Z) / (theta + 6)
        let want = law.tilted_moment(3) / (theta + 6.0);
        assert!(cert.rows[0].cond21_ratio >= want);
        assert!(cert.pass.cond21);
        assert!(cert.pass.cond22);
        assert_eq!(cert.m0, Some(4));
    }

    #[test]
    fn non_monotone_theta_is_reported() {
        let fam = Fixed {
            law: two_point_critical(2, m2()).unwrap(),
            theta: |m| if m == 8 { 0.5 } else { 2.0 },
        };
        let err = check_dominability(&fam, &[4, 8, 16], &EvolveConfig::with_n_max(4), 4).unwrap_err();
        assert!(matches!(err, Error::ThetaNotMonotone { m_hi: 8, .. }), "{err}");
    }

    #[test]
    fn rejects_unsorted_grid() {
        let fam = finite_variance_builder(two_point_critical(2, m2()).unwrap());
        assert!(check_dominability(&fam, &[8, 4], &EvolveConfig::with_n_max(4), 4).is_err());
    }
}
