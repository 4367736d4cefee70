//! Growth of the derivatives `H_n^(k)(m)` of the pgf at `m`.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::n_or_m;
use crate::error::{Error, Result};
use crate::evolve::{evolve_with, EvolutionTrace, EvolveConfig, StepRecord};
use crate::law::{ModelParams, TiltedLaw};

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn need_derivs(trace: &EvolutionTrace, need: usize) -> Result<()> {
    let have = trace.config.k_derivatives;
    if need > have || trace.records.iter().any(|r| r.derivs.len() < need) {
        return Err(Error::MissingDerivatives { have, need });
    }
    Ok(())
}

/// `r_k = sup_n H_n^(k)(m) / (k! (n v M)^(k-1))` per order `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem23 {
    pub big_m: usize,
    pub ratios: BTreeMap<usize, f64>,
    /// Generation attaining each supremum.
    pub argmax: BTreeMap<usize, usize>,
    /// `max_k r_k^(1/k)`.
    pub c4_hat: f64,
}

impl Theorem23 {
    /// `r_k^(1/k)` per order.
    pub fn roots(&self) -> BTreeMap<usize, f64> {
        self.ratios
            .iter()
            .map(|(&k, &r)| (k, r.powf(1.0 / k as f64)))
            .collect()
    }

    /// The bound `m^(1/(m-1)) / (m (m-1))` on `H_n'(m)` for critical and
    /// subcritical laws.
    pub fn first_order_bound(params: ModelParams) -> f64 {
        let m = params.mf();
        m.powf(1.0 / (m - 1.0)) / (m * (m - 1.0))
    }
}

pub fn theorem23_check(
    trace: &EvolutionTrace,
    k_range: RangeInclusive<usize>,
    big_m: usize,
) -> Result<Theorem23> {
    let k_hi = *k_range.end();
    need_derivs(trace, k_hi)?;
    let mut ratios = BTreeMap::new();
    let mut argmax = BTreeMap::new();
    for k in k_range.filter(|&k| k >= 1) {
        let kf = factorial(k);
        let (n_at, r) = trace
            .records
            .iter()
            .map(|rec| {
                let scale = kf * n_or_m(rec.n, big_m).powi(k as i32 - 1);
                (rec.n, rec.derivs[k - 1] / scale)
            })
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        ratios.insert(k, r);
        argmax.insert(k, n_at);
    }
    let c4_hat = ratios
        .iter()
        .map(|(&k, &r)| r.powf(1.0 / k as f64))
        .fold(0.0, f64::max);
    Ok(Theorem23 {
        big_m,
        ratios,
        argmax,
        c4_hat,
    })
}

/// `E(Z_n^2 v_n^Z_n)` at the super-tilt points `v_n = m + 1 / (2 c4 (n v M))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corollary24 {
    pub big_m: usize,
    pub c4: f64,
    pub v: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// `sup_n E(Z_n^2 v_n^Z_n) / (n v M)`.
    pub c6_hat: f64,
    /// `sup_n E(Z_n^2 v_n^Z_n) / ((n v M)^((4-alpha)/2) M^((alpha-2)/2))`, for
    /// stable runs.
    pub c33_hat: Option<f64>,
}

/// Collects super-tilted second moments while an evolution runs; see
/// [`corollary24_check`].
#[derive(Clone, Debug)]
pub struct SuperTiltProbe {
    m: f64,
    big_m: usize,
    c4: f64,
    v: Vec<f64>,
    second_moment: Vec<f64>,
}

impl SuperTiltProbe {
    pub fn new(params: ModelParams, big_m: usize, c4: f64) -> Result<Self> {
        if !(c4 >= 1.0) || !c4.is_finite() {
            return Err(Error::InvalidParameter(format!("c4 must be >= 1, got {c4}")));
        }
        Ok(Self {
            m: params.mf(),
            big_m,
            c4,
            v: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn v_at(&self, n: usize) -> f64 {
        self.m + 1.0 / (2.0 * self.c4 * n_or_m(n, self.big_m))
    }

    pub fn observe(&mut self, rec: &StepRecord, law: &TiltedLaw) {
        let v = self.v_at(rec.n);
        self.v.push(v);
        self.second_moment.push(law.second_moment_at(v));
    }

    pub fn finish(self, alpha: Option<f64>) -> Corollary24 {
        let big_m = self.big_m;
        let c6_hat = self
            .second_moment
            .iter()
            .enumerate()
            .map(|(n, &e)| e / n_or_m(n, big_m))
            .fold(0.0, f64::max);
        let c33_hat = alpha.map(|a| {
            let mm = (big_m.max(1) as f64).powf((a - 2.0) / 2.0);
            self.second_moment
                .iter()
                .enumerate()
                .map(|(n, &e)| e / (n_or_m(n, big_m).powf((4.0 - a) / 2.0) * mm))
                .fold(0.0, f64::max)
        });
        Corollary24 {
            big_m,
            c4: self.c4,
            v: self.v,
            second_moment: self.second_moment,
            c6_hat,
            c33_hat,
        }
    }
}

/// Evolves `law` and evaluates the super-tilted second moments along the way.
pub fn corollary24_check(
    law: &TiltedLaw,
    config: &EvolveConfig,
    big_m: usize,
    c4: f64,
    alpha: Option<f64>,
) -> Result<(EvolutionTrace, Corollary24)> {
    let mut probe = SuperTiltProbe::new(law.params(), big_m, c4)?;
    let trace = evolve_with(law, config, "corollary24", |r, l| probe.observe(r, l))?;
    Ok((trace, probe.finish(alpha)))
}

/// Per-generation ratios of `H_n''(m)` to `theta^(1/2) Pi_n^(1/2)` and of
/// `H_n'''(m)` to `theta Pi_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma25 {
    pub theta: f64,
    /// Index `i` holds generation `n = i + 1`.
    pub ratio_second: Vec<f64>,
    pub ratio_third: Vec<f64>,
    pub c8_hat: f64,
    pub c9_hat: f64,
    /// `D_n(m) = (m-1) m^3 H''' + (4m-5) m^2 H'' + 2 (m-2) m H'` for every `n`.
    pub d: Vec<f64>,
    /// `max_n D_n(m) / (D_0(m) Pi_n)`, at most 1 for non-supercritical laws.
    pub d_ratio_max: f64,
}

pub fn lemma25_check(trace: &EvolutionTrace, theta: f64) -> Result<Lemma25> {
    need_derivs(trace, 3)?;
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be > 0, got {theta}")));
    }
    let m = trace.params.mf();
    let d: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            (m - 1.0) * m.powi(3) * r.derivs[2]
                + (4.0 * m - 5.0) * m * m * r.derivs[1]
                + 2.0 * (m - 2.0) * m * r.derivs[0]
        })
        .collect();
    let mut ratio_second = Vec::new();
    let mut ratio_third = Vec::new();
    for r in trace.records.iter().skip(1) {
        ratio_second.push(r.derivs[1] / (theta.sqrt() * (0.5 * r.log_pi).exp()));
        ratio_third.push(r.derivs[2] / (theta * r.log_pi.exp()));
    }
    let d_ratio_max = if d[0] > 0.0 {
        trace
            .records
            .iter()
            .zip(&d)
            .map(|(r, &dn)| dn / (d[0] * r.log_pi.exp()))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(Lemma25 {
        theta,
        c8_hat: sup(&ratio_second),
        c9_hat: sup(&ratio_third),
        ratio_second,
        ratio_third,
        d,
        d_ratio_max,
    })
}
