//! Finitely supported laws on the non-negative integers, stored in tilted
//! coordinates.
//!
//! A law `P(X = k)` is held as the tilted weights `w_k = P(X = k) * m^k`.
//! Every functional the recursion cares about is linear in these weights:
//!
//! * `E(m^X)      = sum_k w_k` (the tilted mass, `G(m)`),
//! * `E(X m^X)    = sum_k k w_k` (the tilted mean),
//! * `G^(j)(m)    = m^-j sum_k k (k-1) ... (k-j+1) w_k`,
//!
//! and for heavy-tailed initial laws with `P(X = k) ~ m^-k k^-alpha` the
//! weights decay only polynomially, so nothing underflows where the raw
//! probabilities would.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{csum, NeumaierSum};

/// Tolerance on total probability accepted by [`TiltedLaw::from_raw`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// The branching factor `m >= 2` of the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ModelParams {
    m: u32,
}

impl ModelParams {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::BadBranching(m));
        }
        Ok(Self { m })
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn mf(&self) -> f64 {
        self.m as f64
    }
}

impl TryFrom<u32> for ModelParams {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        Self::new(m)
    }
}

impl From<ModelParams> for u32 {
    fn from(p: ModelParams) -> u32 {
        p.m
    }
}

/// Mass removed from a law by numerical tail truncation, accumulated across
/// generations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    pub lost_raw: f64,
    pub lost_tilted: f64,
    pub steps_truncated: u32,
    /// Tilted mass added back by zeroing negative round-off from transform
    /// convolutions.
    pub clamped_tilted: f64,
    /// Sum over generations of `|f - 1|`, where `f` is the factor that puts
    /// the raw mass back to `1 - lost_raw`.
    pub renormalized: f64,
}

/// A probability law on `{0, ..., support_max}` held as tilted weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedLaw {
    params: ModelParams,
    weights: Vec<f64>,
    ledger: MassLedger,
}

/// `m^k` as a float, falling back to log space once the power leaves the
/// normal range.
#[inline]
pub(crate) fn scale_by_power(x: f64, m: f64, k: i64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let p = m.powi(k as i32);
    if p.is_normal() && k.abs() < i32::MAX as i64 {
        x * p
    } else {
        (x.ln() + k as f64 * m.ln()).exp()
    }
}

impl TiltedLaw {
    /// Builds a law from raw probabilities `raw[k] = P(X = k)`.
    pub fn from_raw(raw: &[f64], params: ModelParams) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::NonNormalized { sum: 0.0 });
        }
        for (index, &value) in raw.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let sum = csum(raw.iter().copied());
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NonNormalized { sum });
        }
        let m = params.mf();
        let weights: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(k, &p)| scale_by_power(p, m, k as i64))
            .collect();
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tilted weight at k = {k} overflows f64"
            )));
        }
        Ok(Self::from_parts(weights, params, MassLedger::default()))
    }

    /// Builds a law directly from tilted weights. Normalization is checked
    /// against the raw mass.
    pub fn from_weights(weights: Vec<f64>, params: ModelParams) -> Result<Self> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeMass { index, value });
            }
        }
        let law = Self::from_parts(weights, params, MassLedger::default());
        let sum = law.raw_mass();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NonNormalized { sum });
        }
        Ok(law)
    }

    /// The point mass at `k`.
    pub fn point_mass(k: usize, params: ModelParams) -> Self {
        let mut weights = vec![0.0; k + 1];
        weights[k] = scale_by_power(1.0, params.mf(), k as i64);
        Self::from_parts(weights, params, MassLedger::default())
    }

    /// Assembles a law without validation, trimming trailing zeros.
    pub(crate) fn from_parts(mut weights: Vec<f64>, params: ModelParams, ledger: MassLedger) -> Self {
        while weights.len() > 1 && *weights.last().unwrap() == 0.0 {
            weights.pop();
        }
        if weights.is_empty() {
            weights.push(0.0);
        }
        Self {
            params,
            weights,
            ledger,
        }
    }

    #[inline]
    pub fn params(&self) -> ModelParams {
        self.params
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.params.m
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn ledger(&self) -> &MassLedger {
        &self.ledger
    }

    /// Largest `k` carrying weight (0 for the point mass at 0).
    #[inline]
    pub fn support_max(&self) -> usize {
        self.weights.len() - 1
    }

    /// Number of stored atoms, `support_max + 1`.
    #[inline]
    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    /// `P(X = k)`.
    pub fn raw_prob(&self, k: usize) -> f64 {
        self.weights
            .get(k)
            .map_or(0.0, |&w| scale_by_power(w, self.params.mf(), -(k as i64)))
    }

    pub fn raw_probs(&self) -> Vec<f64> {
        (0..self.weights.len()).map(|k| self.raw_prob(k)).collect()
    }

    /// Total raw probability currently held (1 minus truncation losses).
    pub fn raw_mass(&self) -> f64 {
        csum((0..self.weights.len()).map(|k| self.raw_prob(k)))
    }

    /// `E(m^X) = G(m)`.
    pub fn tilted_mass(&self) -> f64 {
        csum(self.weights.iter().copied())
    }

    /// `E(X m^X)`.
    pub fn tilted_mean(&self) -> f64 {
        csum(self.weights.iter().enumerate().map(|(k, &w)| k as f64 * w))
    }

    /// `E(X^j m^X)`.
    pub fn tilted_moment(&self, j: u32) -> f64 {
        csum(
            self.weights
                .iter()
                .enumerate()
                .map(|(k, &w)| (k as f64).powi(j as i32) * w),
        )
    }

    /// `E(X)`.
    pub fn mean(&self) -> f64 {
        csum((0..self.weights.len()).map(|k| k as f64 * self.raw_prob(k)))
    }

    /// `P(X = 0) = G(0)`.
    #[inline]
    pub fn p_zero(&self) -> f64 {
        self.weights[0]
    }

    /// The criticality parameter `(m-1) E(X m^X) - E(m^X)`.
    pub fn eta(&self) -> f64 {
        let mm1 = self.params.mf() - 1.0;
        csum(
            self.weights
                .iter()
                .enumerate()
                .map(|(k, &w)| (mm1 * k as f64 - 1.0) * w),
        )
    }

    /// `G(m) - (m-1) m G'(m)`, i.e. `-eta`; the functional conserved up to the
    /// product of tilted masses.
    pub fn conserved_functional(&self) -> f64 {
        -self.eta()
    }

    /// `G(u) = E(u^X) = sum_k w_k (u/m)^k`.
    pub fn pgf_at(&self, u: f64) -> f64 {
        let x = u / self.params.mf();
        let mut acc = NeumaierSum::new();
        let mut pow = 1.0;
        for (k, &w) in self.weights.iter().enumerate() {
            if k > 0 {
                pow = if k % 64 == 0 { x.powi(k as i32) } else { pow * x };
            }
            if w != 0.0 {
                acc.add(w * pow);
            }
        }
        acc.value()
    }

    /// `G^(j)(m) = m^-j sum_k k (k-1) ... (k-j+1) w_k`, computed exactly from the
    /// weights.
    pub fn factorial_derivative(&self, j: u32) -> f64 {
        let mut acc = NeumaierSum::new();
        for (k, &w) in self.weights.iter().enumerate().skip(j as usize) {
            if w == 0.0 {
                continue;
            }
            let mut ff = 1.0;
            for i in 0..j as usize {
                ff *= (k - i) as f64;
            }
            acc.add(ff * w);
        }
        acc.value() / self.params.mf().powi(j as i32)
    }

    /// `E(X^2 v^X)`.
    pub fn second_moment_at(&self, v: f64) -> f64 {
        let x = v / self.params.mf();
        csum(
            self.weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(k, &w)| (k * k) as f64 * w * x.powi(k as i32)),
        )
    }
}

/// `c25(s) = max(sup_{x>0} x (s/m)^(-x/e), 1)`.
///
/// The supremum of `x exp(-x ln(s/m) / e)` sits at `x = e / ln(s/m)` with
/// value `1 / ln(s/m)`.
pub fn c25_constant(s: f64, params: ModelParams) -> Result<f64> {
    let m = params.mf();
    if !(s > m) || !s.is_finite() {
        return Err(Error::BadTiltPoint { s, m: params.m });
    }
    Ok((1.0 / (s / m).ln()).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> ModelParams {
        ModelParams::new(2).unwrap()
    }

    #[test]
    fn rejects_small_m() {
        assert!(matches!(ModelParams::new(1), Err(Error::BadBranching(1))));
    }

    #[test]
    fn point_mass_at_zero() {
        let law = TiltedLaw::from_raw(&[1.0], m2()).unwrap();
        assert_eq!(law.weights(), &[1.0]);
        assert_eq!(law.raw_mass(), 1.0);
        assert_eq!(law.eta(), -1.0);
        assert_eq!(law.pgf_at(0.0), 1.0);
        assert_eq!(law.pgf_at(2.0), 1.0);
        assert_eq!(law.second_moment_at(5.0), 0.0);
    }

    #[test]
    fn point_mass_at_one() {
        let law = TiltedLaw::from_raw(&[0.0, 1.0], m2()).unwrap();
        assert_eq!(law.weights(), &[0.0, 2.0]);
        assert_eq!(law.second_moment_at(3.0), 3.0);
    }

    #[test]
    fn two_atom_law() {
        let law = TiltedLaw::from_raw(&[0.8, 0.0, 0.2], m2()).unwrap();
        assert_eq!(law.weights(), &[0.8, 0.0, 0.8]);
        assert!((law.tilted_mass() - 1.6).abs() < 1e-15);
    }

    #[test]
    fn point_mass_at_two_is_supercritical() {
        let law = TiltedLaw::point_mass(2, m2());
        assert_eq!(law.eta(), 4.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            TiltedLaw::from_raw(&[0.5, 0.4], m2()),
            Err(Error::NonNormalized { .. })
        ));
        assert!(matches!(
            TiltedLaw::from_raw(&[1.5, -0.5], m2()),
            Err(Error::NegativeMass { index: 1, .. })
        ));
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let law = TiltedLaw::from_raw(&[1.0, 0.0, 0.0], m2()).unwrap();
        assert_eq!(law.support_max(), 0);
    }

    #[test]
    fn c25_values() {
        let p = m2();
        let e = std::f64::consts::E;
        assert!((c25_constant(2.0 * e, p).unwrap() - 1.0).abs() < 1e-12);
        assert!((c25_constant(2.0 * e.sqrt(), p).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(c25_constant(2.0 * e * e, p).unwrap(), 1.0);
        assert!(matches!(c25_constant(2.0, p), Err(Error::BadTiltPoint { .. })));
    }

    #[test]
    fn far_atoms_leave_the_normal_range_of_m_pow_k() {
        let p = m2();
        let mut raw = vec![0.0; 1501];
        raw[1500] = 1e-300;
        raw[0] = 1.0 - 1e-300;
        let law = TiltedLaw::from_raw(&raw, p).unwrap();
        let back = law.raw_prob(1500);
        assert!((back / 1e-300 - 1.0).abs() < 1e-12);

        let mut raw = vec![0.0; 3001];
        raw[0] = 0.5;
        raw[3000] = 0.5;
        assert!(TiltedLaw::from_raw(&raw, p).is_err());
    }
}
