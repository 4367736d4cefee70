//! Exact rational arithmetic for small laws.
//!
//! Raw probabilities are kept as [`BigRational`]s, so one recursion step,
//! the criticality parameter and the conserved functional can be compared
//! against hand-derived fixtures with `==`. Supports are capped at 64 atoms
//! on input and evolutions at 8 generations.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::law::{ModelParams, TiltedLaw};

pub const MAX_EXACT_SUPPORT: usize = 64;
pub const MAX_EXACT_GENERATIONS: usize = 8;

/// `p / q` as a [`BigRational`].
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalLaw {
    params: ModelParams,
    probs: Vec<BigRational>,
}

impl RationalLaw {
    pub fn new(probs: Vec<BigRational>, params: ModelParams) -> Result<Self> {
        if probs.is_empty() || probs.len() > MAX_EXACT_SUPPORT {
            return Err(Error::InvalidParameter(format!(
                "exact laws need 1..={MAX_EXACT_SUPPORT} atoms, got {}",
                probs.len()
            )));
        }
        for (index, p) in probs.iter().enumerate() {
            if p < &BigRational::zero() {
                return Err(Error::NegativeMass {
                    index,
                    value: p.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::NonNormalized {
                sum: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self::from_parts(probs, params))
    }

    fn from_parts(mut probs: Vec<BigRational>, params: ModelParams) -> Self {
        while probs.len() > 1 && probs.last().is_some_and(Zero::is_zero) {
            probs.pop();
        }
        Self { params, probs }
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    fn m(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.params.m()))
    }

    pub fn raw_mass(&self) -> BigRational {
        self.probs.iter().sum()
    }

    /// `E(m^X)`.
    pub fn tilted_mass(&self) -> BigRational {
        let m = self.m();
        let mut pow = BigRational::one();
        let mut acc = BigRational::zero();
        for p in &self.probs {
            acc += p * &pow;
            pow *= &m;
        }
        acc
    }

    /// `E(X m^X)`.
    pub fn tilted_mean(&self) -> BigRational {
        let m = self.m();
        let mut pow = BigRational::one();
        let mut acc = BigRational::zero();
        for (k, p) in self.probs.iter().enumerate() {
            acc += p * &pow * BigRational::from_integer(BigInt::from(k));
            pow *= &m;
        }
        acc
    }

    /// `(m-1) E(X m^X) - E(m^X)`.
    pub fn eta(&self) -> BigRational {
        (self.m() - BigRational::one()) * self.tilted_mean() - self.tilted_mass()
    }

    /// `G(m) - (m-1) m G'(m) = -eta`.
    pub fn conserved_functional(&self) -> BigRational {
        -self.eta()
    }

    /// Law of an independent sum.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut out = vec![BigRational::zero(); self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_parts(out, self.params)
    }

    /// Law of `X_1 + ... + X_m`.
    pub fn m_fold_sum(&self) -> Self {
        let mut acc = self.clone();
        for _ in 1..self.params.m() {
            acc = acc.convolve(self);
        }
        acc
    }

    /// Law of `(X_1 + ... + X_m - 1)^+`.
    pub fn dr_step(&self) -> Self {
        let s = self.m_fold_sum();
        let mut probs: Vec<BigRational> = s.probs.iter().skip(1).cloned().collect();
        if probs.is_empty() {
            probs.push(BigRational::zero());
        }
        probs[0] += &s.probs[0];
        Self::from_parts(probs, self.params)
    }

    /// Laws of generations `0..=n`.
    pub fn evolve(&self, n: usize) -> Result<Vec<Self>> {
        if n > MAX_EXACT_GENERATIONS {
            return Err(Error::InvalidParameter(format!(
                "exact evolution is capped at {MAX_EXACT_GENERATIONS} generations"
            )));
        }
        let mut out = vec![self.clone()];
        for _ in 0..n {
            let next = out.last().unwrap().dr_step();
            out.push(next);
        }
        Ok(out)
    }

    /// Float copy in tilted coordinates.
    pub fn to_tilted(&self) -> TiltedLaw {
        let m = self.m();
        let mut pow = BigRational::one();
        let weights = self
            .probs
            .iter()
            .map(|p| {
                let w = (p * &pow).to_f64().unwrap_or(f64::NAN);
                pow *= &m;
                w
            })
            .collect();
        TiltedLaw::from_parts(weights, self.params, Default::default())
    }
}
