//! Initial laws: the two-point critical family, the critical stable family
//! with an exact power tail, and the truncations that turn a critical law
//! into a dominable sequence indexed by `M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{MassLedger, ModelParams, TiltedLaw};
use crate::special::{polylog, zeta};
use crate::sum::{csum, NeumaierSum};

/// Parameters of a constructed critical stable law
/// `P(Y_0 = k) = c m^-k k^-alpha` for `1 <= k <= k_cap`, atom `p0` at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableFamilyParams {
    pub m: u32,
    pub alpha: f64,
    pub k_cap: usize,
    pub c: f64,
    pub p0: f64,
}

/// The critical law with atoms at 0 and `a`:
/// `P(X = a) = 1 / (1 + m^a ((m-1) a - 1))`.
pub fn two_point_critical(a: usize, params: ModelParams) -> Result<TiltedLaw> {
    if a < 2 {
        return Err(Error::InvalidParameter(format!(
            "two-point critical law needs a >= 2, got {a}"
        )));
    }
    let m = params.mf();
    let ma = m.powi(a as i32);
    let p = 1.0 / (1.0 + ma * ((m - 1.0) * a as f64 - 1.0));
    let mut weights = vec![0.0; a + 1];
    weights[0] = 1.0 - p;
    weights[a] = p * ma;
    Ok(TiltedLaw::from_parts(weights, params, MassLedger::default()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 2.0 && alpha < 4.0) {
        return Err(Error::InvalidParameter(format!(
            "stable exponent must satisfy 2 < alpha < 4, got {alpha}"
        )));
    }
    Ok(())
}

/// Critical law with the exact tail `P(Y_0 = k) = c m^-k k^-alpha` on
/// `1..=k_cap`.
///
/// `c` and the atom `p0` solve the two linear conditions "total mass 1" and
/// "eta = 0" for the capped support:
///
/// ```text
/// p0 + c L = 1,       p0 = c ((m-1) S1 - S0),
/// S1 = sum k^(1-alpha), S0 = sum k^-alpha, L = sum m^-k k^-alpha.
/// ```
pub fn stable_critical_init(
    m: u32,
    alpha: f64,
    k_cap: usize,
) -> Result<(TiltedLaw, StableFamilyParams)> {
    let params = ModelParams::new(m)?;
    check_alpha(alpha)?;
    if k_cap < 2 {
        return Err(Error::InvalidParameter(format!(
            "stable family needs K >= 2, got {k_cap}"
        )));
    }
    let mf = params.mf();
    let mut s1 = NeumaierSum::new();
    let mut s0 = NeumaierSum::new();
    let mut l = NeumaierSum::new();
    let ln_m = mf.ln();
    // smallest terms first
    for k in (1..=k_cap).rev() {
        let kf = k as f64;
        let pk = kf.powf(-alpha);
        s1.add(kf * pk);
        s0.add(pk);
        let raw = (-(kf * ln_m) - alpha * kf.ln()).exp();
        l.add(raw);
    }
    let (c, p0) = solve_stable(mf, s1.value(), s0.value(), l.value())?;

    let mut weights = Vec::with_capacity(k_cap + 1);
    weights.push(p0);
    weights.extend((1..=k_cap).map(|k| c * (k as f64).powf(-alpha)));
    let law = TiltedLaw::from_parts(weights, params, MassLedger::default());
    Ok((
        law,
        StableFamilyParams {
            m,
            alpha,
            k_cap,
            c,
            p0,
        },
    ))
}

fn solve_stable(m: f64, s1: f64, s0: f64, l: f64) -> Result<(f64, f64)> {
    let a = (m - 1.0) * s1 - s0;
    let c = 1.0 / (a + l);
    let p0 = c * a;
    if !(c > 0.0) || !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InfeasibleFamily { p0, c });
    }
    Ok((c, p0))
}

/// `(c, p0)` of the stable family in the limit `k_cap -> infinity`:
/// `c = 1 / ((m-1) zeta(alpha-1) - zeta(alpha) + Li_alpha(1/m))`.
pub fn stable_limit_constants(m: u32, alpha: f64) -> Result<(f64, f64)> {
    let params = ModelParams::new(m)?;
    check_alpha(alpha)?;
    let mf = params.mf();
    solve_stable(mf, zeta(alpha - 1.0), zeta(alpha), polylog(alpha, 1.0 / mf))
}

/// `c28 = max_k P(Y_0 = k) m^k k^alpha` over the support `k >= 1`.
pub fn tail_constant(law: &TiltedLaw, alpha: f64) -> f64 {
    law.weights()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| w * (k as f64).powf(alpha))
        .fold(0.0, f64::max)
}

/// `c30 = max(c28 2^(4-alpha) / (4-alpha), 1)`.
pub fn theta_constant(c28: f64, alpha: f64) -> f64 {
    (c28 * 2f64.powf(4.0 - alpha) / (4.0 - alpha)).max(1.0)
}

/// How [`truncate_initial`] builds the bounded law `Z_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TruncationMode {
    /// Cut at `M zeta(M)` with `zeta(M) = -log E(Y^3 m^Y 1{Y > M})`,
    /// `theta = max(E(Y^3 m^Y), 1)`.
    FiniteVariance,
    /// Cut at `M`, `theta(M) = c30 M^(4-alpha)`.
    Stable { alpha: f64 },
}

/// A truncated initial law `Z_0 = Y_0 1{Y_0 <= cutoff}` with its `theta(M)`.
#[derive(Clone, Debug)]
pub struct Truncated {
    pub law: TiltedLaw,
    pub theta: f64,
    /// `None` when the cutoff is infinite and `Z_0 = Y_0`.
    pub cutoff: Option<usize>,
}

/// `Z_0 = Y_0 1{Y_0 <= a(M)}`. Removed raw mass moves to the atom at 0, so
/// the result is again a probability law.
pub fn truncate_initial(law: &TiltedLaw, big_m: usize, mode: TruncationMode) -> Result<Truncated> {
    if big_m < 1 {
        return Err(Error::InvalidParameter("truncation level M must be >= 1".into()));
    }
    let w = law.weights();
    match mode {
        TruncationMode::Stable { alpha } => {
            check_alpha(alpha)?;
            let c30 = theta_constant(tail_constant(law, alpha), alpha);
            let theta = c30 * (big_m as f64).powf(4.0 - alpha);
            Ok(Truncated {
                law: cut_at(law, big_m),
                theta,
                cutoff: Some(big_m),
            })
        }
        TruncationMode::FiniteVariance => {
            let theta = law.tilted_moment(3).max(1.0);
            let tail = csum(
                w.iter()
                    .enumerate()
                    .skip(big_m + 1)
                    .map(|(k, &x)| (k as f64).powi(3) * x),
            );
            if tail == 0.0 {
                return Ok(Truncated {
                    law: law.clone(),
                    theta,
                    cutoff: None,
                });
            }
            let zeta_m = -tail.ln();
            let threshold = (big_m as f64 * zeta_m).floor().max(0.0);
            let cutoff = if threshold >= law.support_max() as f64 {
                law.support_max()
            } else {
                threshold as usize
            };
            Ok(Truncated {
                law: cut_at(law, cutoff),
                theta,
                cutoff: Some(cutoff),
            })
        }
    }
}

fn cut_at(law: &TiltedLaw, cutoff: usize) -> TiltedLaw {
    if cutoff >= law.support_max() {
        return law.clone();
    }
    let moved = csum((cutoff + 1..=law.support_max()).map(|k| law.raw_prob(k)));
    let mut weights = law.weights()[..=cutoff].to_vec();
    weights[0] += moved;
    TiltedLaw::from_parts(weights, law.params(), *law.ledger())
}
