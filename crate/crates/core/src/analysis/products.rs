//! Closed-form bounds on `Pi_n = prod_{i<n} E(m^{X_i})^(m-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::EvolutionTrace;
use crate::families::{truncate_initial, TruncationMode};
use crate::law::TiltedLaw;
use crate::sum::csum;

/// `|eta|` below this fraction of the tilted mass counts as critical.
const CRITICAL_TOL: f64 = 1e-12;

fn require_subcritical(eta: f64, tilted_mass: f64) -> Result<()> {
    if eta < -CRITICAL_TOL * tilted_mass {
        Ok(())
    } else {
        Err(Error::NotSubcritical { eta })
    }
}

/// `1 / (E(m^X_0) - (m-1) E(X_0 m^X_0)) = 1 / (-eta)`, the limit bound on
/// `Pi_n` for strictly subcritical laws.
pub fn lemma42_bound(law: &TiltedLaw) -> Result<f64> {
    let eta = law.eta();
    require_subcritical(eta, law.tilted_mass())?;
    Ok(1.0 / -eta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma42Report {
    pub bound: f64,
    /// `Pi_n` at the last recorded generation.
    pub pi_last: f64,
    /// `max_n Pi_n / bound`.
    pub max_ratio: f64,
    pub monotone: bool,
}

impl Lemma42Report {
    pub fn pass(&self) -> bool {
        self.monotone && self.max_ratio <= 1.0 + 1e-8
    }
}

/// Checks that `Pi_n` never decreases and stays below [`lemma42_bound`] of
/// the initial law.
pub fn lemma42_check(trace: &EvolutionTrace) -> Result<Lemma42Report> {
    let r0 = &trace.records[0];
    require_subcritical(r0.eta, r0.tilted_mass)?;
    let bound = 1.0 / -r0.eta;
    let log_bound = bound.ln();
    let monotone = trace
        .records
        .windows(2)
        .all(|w| w[1].log_pi >= w[0].log_pi);
    let max_ratio = trace
        .records
        .iter()
        .map(|r| (r.log_pi - log_bound).exp())
        .fold(0.0, f64::max);
    Ok(Lemma42Report {
        bound,
        pi_last: trace.records.last().unwrap().log_pi.exp(),
        max_ratio,
        monotone,
    })
}

/// `max_n |Pi_n - D_n / D_0| / |Pi_n|` with `D_n = G_n(m) - (m-1) m G_n'(m)`,
/// for laws with `eta != 0`.
pub fn identity41_max_rel_err(trace: &EvolutionTrace) -> Result<f64> {
    let d0 = trace.records[0].lhs26;
    if d0 == 0.0 {
        return Err(Error::InvalidParameter(
            "ratio form of the conservation identity needs eta != 0".into(),
        ));
    }
    Ok(trace
        .records
        .iter()
        .map(|r| {
            let pi = r.log_pi.exp();
            ((r.lhs26 / d0 - pi) / pi).abs()
        })
        .fold(0.0, f64::max))
}

/// Both sides of the truncation gap identity for `Z_0 = Y_0 1{Y_0 <= M}`
/// built from a critical `Y_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationGap {
    /// `E(m^Z_0) - (m-1) E(Z_0 m^Z_0)`, from the truncated law.
    pub lhs: f64,
    /// `E[((m-1) Y_0 - 1) m^Y_0 1{Y_0 > M}] + P(Y_0 > M)`, from the tail of `Y_0`.
    pub rhs: f64,
}

pub fn truncation_gap(y0: &TiltedLaw, big_m: usize, alpha: f64) -> Result<TruncationGap> {
    let z0 = truncate_initial(y0, big_m, TruncationMode::Stable { alpha })?.law;
    let mm1 = y0.params().mf() - 1.0;
    let tail = big_m + 1..=y0.support_max();
    let w = y0.weights();
    let rhs = csum(tail.clone().map(|k| (mm1 * k as f64 - 1.0) * w[k]))
        + csum(tail.map(|k| y0.raw_prob(k)));
    Ok(TruncationGap {
        lhs: z0.conserved_functional(),
        rhs,
    })
}

/// `Delta_0(s) = sum_{k>=1} ((m-1) k - 1) (1 - (k+1) x^k + k x^(k+1)) w_k`
/// with `x = s/m`, for `m/2 < s < m`.
pub fn delta0(law: &TiltedLaw, s: f64) -> Result<f64> {
    let m = law.params().mf();
    if !(s > m / 2.0 && s < m) {
        return Err(Error::TiltOutOfRange {
            s,
            lo: m / 2.0,
            hi: m,
        });
    }
    let x = s / m;
    let mm1 = m - 1.0;
    Ok(csum(law.weights().iter().enumerate().skip(1).filter(|(_, &w)| w != 0.0).map(
        |(k, &w)| {
            let kf = k as f64;
            let xk = x.powi(k as i32);
            // 1 - (k+1) x^k + k x^(k+1) = 1 - x^k - k x^k (1 - x)
            let shape = (1.0 - xk) - kf * xk * (1.0 - x);
            (mm1 * kf - 1.0) * shape * w
        },
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma51 {
    pub n: usize,
    /// `s_n = (1 - 1/(3n)) m`.
    pub s_n: f64,
    pub delta0: f64,
    /// `(m / (2 s_n - m))^n / Delta_0(s_n)`.
    pub bound: f64,
    /// `E(X_0^3 m^X_0 1{2 <= X_0 <= 3n})`.
    pub truncated_cubic: f64,
    /// `n^2 / truncated_cubic`, the shape of the companion bound.
    pub n2_over_cubic: f64,
}

pub fn lemma51_bound(law: &TiltedLaw, n: usize) -> Result<Lemma51> {
    if n < 1 {
        return Err(Error::InvalidParameter("lower-tilt bound needs n >= 1".into()));
    }
    let m = law.params().mf();
    let s_n = (1.0 - 1.0 / (3.0 * n as f64)) * m;
    let d = delta0(law, s_n)?;
    if !(d > 0.0) {
        return Err(Error::DegenerateDelta { value: d });
    }
    let bound = (n as f64 * (m / (2.0 * s_n - m)).ln() - d.ln()).exp();
    let w = law.weights();
    let hi = (3 * n).min(law.support_max());
    let truncated_cubic = if hi >= 2 {
        csum((2..=hi).map(|k| (k as f64).powi(3) * w[k]))
    } else {
        0.0
    };
    Ok(Lemma51 {
        n,
        s_n,
        delta0: d,
        bound,
        truncated_cubic,
        n2_over_cubic: (n * n) as f64 / truncated_cubic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve, EvolveConfig};
    use crate::families::{stable_critical_init, two_point_critical};
    use crate::law::ModelParams;

    fn m2() -> ModelParams {
        ModelParams::new(2).unwrap()
    }

    fn subcritical() -> TiltedLaw {
        TiltedLaw::from_raw(&[0.9, 0.0, 0.1], m2()).unwrap()
    }

    #[test]
    fn lemma42_fixture() {
        let law = subcritical();
        assert!((lemma42_bound(&law).unwrap() - 2.0).abs() < 1e-15);
        let t = evolve(&law, &EvolveConfig::with_n_max(200), "sub").unwrap();
        assert!((t.records[1].log_pi.exp() - 1.3).abs() < 1e-15);
        let rep = lemma42_check(&t).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(rep.max_ratio > 0.99, "plateau should approach the bound");

        let crit = two_point_critical(2, m2()).unwrap();
        assert!(matches!(lemma42_bound(&crit), Err(Error::NotSubcritical { .. })));
    }

    #[test]
    fn ratio_identity_on_subcritical_run() {
        let t = evolve(&subcritical(), &EvolveConfig::with_n_max(100), "sub").unwrap();
        assert!(identity41_max_rel_err(&t).unwrap() < 1e-9);
    }

    #[test]
    fn delta0_cases() {
        let law = two_point_critical(2, m2()).unwrap();
        assert!((delta0(&law, 1.0 + 1e-12).unwrap() - 0.4).abs() < 1e-11);
        assert!(delta0(&law, 2.0 - 1e-12).unwrap().abs() < 1e-10);
        assert!(matches!(delta0(&law, 1.0), Err(Error::TiltOutOfRange { .. })));
        assert!(delta0(&law, 2.0).is_err());

        let flat = TiltedLaw::from_raw(&[0.5, 0.5], m2()).unwrap();
        for s in [1.1, 1.5, 1.9] {
            assert_eq!(delta0(&flat, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn lemma51_two_point() {
        let law = two_point_critical(2, m2()).unwrap();
        let b = lemma51_bound(&law, 4).unwrap();
        let t = evolve(&law, &EvolveConfig::with_n_max(4), "tp").unwrap();
        assert!(t.records[4].log_pi.exp() <= b.bound);
        assert!((b.truncated_cubic - 32.0 / 5.0).abs() < 1e-14);
        assert!((b.s_n - 11.0 / 6.0).abs() < 1e-15);

        let flat = TiltedLaw::from_raw(&[0.5, 0.5], m2()).unwrap();
        assert!(matches!(lemma51_bound(&flat, 3), Err(Error::DegenerateDelta { .. })));
    }

    #[test]
    fn truncation_gap_sides_agree() {
        let (y0, _) = stable_critical_init(2, 3.0, 2000).unwrap();
        for big_m in [16, 64, 256, 1024] {
            let g = truncation_gap(&y0, big_m, 3.0).unwrap();
            assert!((g.lhs - g.rhs).abs() < 1e-12, "M = {big_m}: {g:?}");
            assert!(g.lhs > 0.0);
        }
    }
}
