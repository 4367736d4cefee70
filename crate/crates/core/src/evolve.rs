//! One generation of the recursion `X_{n+1} = (X_{n,1} + ... + X_{n,m} - 1)^+`
//! and multi-generation evolution with per-generation observables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::conv::{self, ConvStrategy, Convolved};
use crate::error::{Error, Result};
use crate::law::{MassLedger, ModelParams, TiltedLaw};
use crate::sum::csum;

/// Relative tolerance of the pgf check `G_{n+1}(m) = G_n(m)^m / m + (1 - 1/m) G_n(0)^m`.
pub const PGF_CHECK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub n_max: usize,
    /// Per-generation budget of tilted mass that tail truncation may drop.
    pub tail_epsilon: f64,
    pub support_cap: usize,
    pub conv_strategy: ConvStrategy,
    /// Highest derivative order `k` of `H_n^(k)(m)` recorded per generation.
    pub k_derivatives: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            n_max: 0,
            tail_epsilon: 1e-14,
            support_cap: 1 << 22,
            conv_strategy: ConvStrategy::Auto,
            k_derivatives: 8,
        }
    }
}

impl EvolveConfig {
    pub fn with_n_max(n_max: usize) -> Self {
        Self {
            n_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_epsilon must be >= 0, got {}",
                self.tail_epsilon
            )));
        }
        if self.support_cap < 2 {
            return Err(Error::InvalidParameter(format!(
                "support_cap must be >= 2, got {}",
                self.support_cap
            )));
        }
        Ok(())
    }
}

/// Observables of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    /// `E(m^{X_n})`.
    pub tilted_mass: f64,
    /// `E(X_n m^{X_n})`.
    pub tilted_mean: f64,
    pub eta: f64,
    pub mean: f64,
    pub p_zero: f64,
    /// `sum_{i<n} (m-1) log E(m^{X_i})`.
    pub log_pi: f64,
    /// `H_n^(k)(m)` for `k = 1..=k_derivatives`.
    pub derivs: Vec<f64>,
    /// `G_n(m) - (m-1) m G_n'(m)`.
    pub lhs26: f64,
    pub lost_raw: f64,
    pub support_size: usize,
}

impl StepRecord {
    fn observe(n: usize, law: &TiltedLaw, log_pi: f64, k_derivatives: usize) -> Self {
        let tilted_mass = law.tilted_mass();
        let tilted_mean = law.tilted_mean();
        let eta = law.eta();
        Self {
            n,
            tilted_mass,
            tilted_mean,
            eta,
            mean: law.mean(),
            p_zero: law.p_zero(),
            log_pi,
            derivs: (1..=k_derivatives as u32)
                .map(|k| law.factorial_derivative(k))
                .collect(),
            lhs26: -eta,
            lost_raw: law.ledger().lost_raw,
            support_size: law.support_size(),
        }
    }

    /// `H_n^(k)(m)`; `k = 0` is the tilted mass.
    pub fn deriv(&self, k: usize) -> Option<f64> {
        if k == 0 {
            Some(self.tilted_mass)
        } else {
            self.derivs.get(k - 1).copied()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub config: EvolveConfig,
    pub params: ModelParams,
    pub initial: String,
    pub records: Vec<StepRecord>,
}

/// Law of `X_1 + ... + X_m`, by repeated squaring.
pub fn m_fold_sum(law: &TiltedLaw, strategy: ConvStrategy) -> TiltedLaw {
    let (sum, clamped) = m_fold_weights(law, strategy);
    let mut ledger = *law.ledger();
    ledger.clamped_tilted += clamped;
    TiltedLaw::from_parts(sum, law.params(), ledger)
}

fn m_fold_weights(law: &TiltedLaw, strategy: ConvStrategy) -> (Vec<f64>, f64) {
    let mut e = law.m();
    let mut base: Vec<f64> = law.weights().to_vec();
    let mut acc: Option<Vec<f64>> = None;
    let mut clamped = 0.0;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => {
                    let Convolved { weights, clamped: c } = conv::convolve(&a, &base, strategy);
                    clamped += c;
                    weights
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        let Convolved { weights, clamped: c } = conv::self_convolve(&base, strategy);
        clamped += c;
        base = weights;
    }
    (acc.expect("m >= 2"), clamped)
}

/// Law of an independent sum of two laws with the same `m`.
pub fn convolve(a: &TiltedLaw, b: &TiltedLaw, strategy: ConvStrategy) -> Result<TiltedLaw> {
    if a.m() != b.m() {
        return Err(Error::InvalidParameter(format!(
            "convolving laws with m = {} and m = {}",
            a.m(),
            b.m()
        )));
    }
    let Convolved { weights, clamped } = conv::convolve(a.weights(), b.weights(), strategy);
    let mut ledger = merge_ledgers(a.ledger(), b.ledger());
    ledger.clamped_tilted += clamped;
    Ok(TiltedLaw::from_parts(weights, a.params(), ledger))
}

fn merge_ledgers(a: &MassLedger, b: &MassLedger) -> MassLedger {
    MassLedger {
        lost_raw: a.lost_raw + b.lost_raw,
        lost_tilted: a.lost_tilted + b.lost_tilted,
        steps_truncated: a.steps_truncated.max(b.steps_truncated),
        clamped_tilted: a.clamped_tilted + b.clamped_tilted,
        renormalized: a.renormalized + b.renormalized,
    }
}

/// `(S - 1)^+` in tilted coordinates: `w'_0 = w_0 + w_1 / m`,
/// `w'_k = w_{k+1} / m`.
fn shift_fold(mut s: Vec<f64>, m: f64) -> Vec<f64> {
    if s.len() == 1 {
        return s;
    }
    let w0 = s[0];
    s.remove(0);
    for w in s.iter_mut() {
        *w /= m;
    }
    s[0] += w0;
    s
}

/// Removes the longest suffix whose tilted mass is at most `eps`.
fn truncate_tail(weights: &mut Vec<f64>, eps: f64, m: f64, ledger: &mut MassLedger) {
    while weights.len() > 1 && *weights.last().unwrap() == 0.0 {
        weights.pop();
    }
    if eps <= 0.0 {
        return;
    }
    let mut acc = 0.0;
    let mut cut = weights.len();
    while cut > 1 {
        let next = acc + weights[cut - 1];
        if next > eps {
            break;
        }
        acc = next;
        cut -= 1;
    }
    if cut == weights.len() {
        return;
    }
    let lost_raw = csum(
        (cut..weights.len()).map(|k| crate::law::scale_by_power(weights[k], m, -(k as i64))),
    );
    let lost_tilted = csum(weights[cut..].iter().copied());
    weights.truncate(cut);
    while weights.len() > 1 && *weights.last().unwrap() == 0.0 {
        weights.pop();
    }
    if lost_tilted > 0.0 {
        ledger.lost_raw += lost_raw;
        ledger.lost_tilted += lost_tilted;
        ledger.steps_truncated += 1;
    }
}

/// One generation. Checks the pgf identity at `u = m` before truncating the
/// tail.
///
/// Total mass maps as `M -> M^m`, so rounding drift in it doubles (for
/// `m = 2`) every generation and reaches `P(X = 0) > 1` after ~50 steps on
/// critical laws. Each step therefore rescales the weights to raw mass
/// `1 - lost_raw`; the size of the correction goes to the ledger.
pub fn dr_step(law: &TiltedLaw, config: &EvolveConfig) -> Result<TiltedLaw> {
    let m = law.params().mf();
    let g = law.tilted_mass();
    let g0 = law.p_zero();

    let (sum, clamped) = m_fold_weights(law, config.conv_strategy);
    let mut weights = shift_fold(sum, m);

    let expected = g.powi(law.m() as i32) / m + (1.0 - 1.0 / m) * g0.powi(law.m() as i32);
    let got = csum(weights.iter().copied());
    if !((got - expected).abs() <= PGF_CHECK_TOL * expected.abs().max(1.0)) {
        return Err(Error::PgfCheckFailed { expected, got });
    }

    let mut ledger = *law.ledger();
    ledger.clamped_tilted += clamped;
    truncate_tail(&mut weights, config.tail_epsilon, m, &mut ledger);
    if weights.len() > config.support_cap {
        return Err(Error::SupportOverflow {
            size: weights.len(),
            cap: config.support_cap,
        });
    }
    let raw = csum(
        weights
            .iter()
            .enumerate()
            .map(|(k, &w)| crate::law::scale_by_power(w, m, -(k as i64))),
    );
    let f = (1.0 - ledger.lost_raw) / raw;
    if f != 1.0 {
        for w in weights.iter_mut() {
            *w *= f;
        }
        ledger.renormalized += (f - 1.0).abs();
    }
    Ok(TiltedLaw::from_parts(weights, law.params(), ledger))
}

/// Evolves `law` for `config.n_max` generations, recording every generation
/// including `n = 0`.
pub fn evolve(law: &TiltedLaw, config: &EvolveConfig, initial: impl Into<String>) -> Result<EvolutionTrace> {
    evolve_with(law, config, initial, |_, _| {})
}

/// [`evolve`] with an observer that sees each generation's law next to its
/// record.
pub fn evolve_with<F>(
    law: &TiltedLaw,
    config: &EvolveConfig,
    initial: impl Into<String>,
    mut observer: F,
) -> Result<EvolutionTrace>
where
    F: FnMut(&StepRecord, &TiltedLaw),
{
    config.validate()?;
    let mut records = Vec::with_capacity(config.n_max + 1);
    let mm1 = law.params().mf() - 1.0;
    let mut current = law.clone();
    let mut log_pi = 0.0;
    for n in 0..=config.n_max {
        if n > 0 {
            current = dr_step(&current, config).map_err(|e| Error::at_generation(n, e))?;
        }
        let rec = StepRecord::observe(n, &current, log_pi, config.k_derivatives);
        log_pi += mm1 * rec.tilted_mass.ln();
        observer(&rec, &current);
        records.push(rec);
    }
    Ok(EvolutionTrace {
        config: config.clone(),
        params: law.params(),
        initial: initial.into(),
        records,
    })
}

impl EvolutionTrace {
    pub fn n_max(&self) -> usize {
        self.records.len() - 1
    }

    pub fn record(&self, n: usize) -> Result<&StepRecord> {
        self.records.get(n).ok_or(Error::GenerationOutOfRange {
            n,
            n_max: self.n_max(),
        })
    }

    /// `Pi_n = prod_{i<n} E(m^{X_i})^(m-1)` as `(log, linear)`.
    pub fn product_pi(&self, n: usize) -> Result<(f64, f64)> {
        let log = self.record(n)?.log_pi;
        Ok((log, log.exp()))
    }

    /// Both sides of `G_n(m) - (m-1) m G_n'(m) = [G_0(m) - (m-1) m G_0'(m)] Pi_n`.
    pub fn verify_identity_26(&self, n: usize) -> Result<Identity26> {
        let rec = self.record(n)?;
        let lhs = rec.lhs26;
        let rhs = self.records[0].lhs26 * rec.log_pi.exp();
        let rel_err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
        Ok(Identity26 { lhs, rhs, rel_err })
    }

    /// `E(X_n) / m^n`, the monotone upper approximation of the free energy.
    pub fn free_energy_upper(&self, n: usize) -> Result<f64> {
        let rec = self.record(n)?;
        Ok(crate::law::scale_by_power(rec.mean, self.params.mf(), -(n as i64)))
    }

    /// Writes the trace as CSV, one row per generation, floats with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.config.k_derivatives;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "n",
            "tilted_mass",
            "tilted_mean",
            "eta",
            "mean",
            "p_zero",
            "log_pi",
            "lhs26",
            "lost_raw",
            "support_size",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=k).map(|i| format!("H{i}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.n.to_string(),
                fmt17(r.tilted_mass),
                fmt17(r.tilted_mean),
                fmt17(r.eta),
                fmt17(r.mean),
                fmt17(r.p_zero),
                fmt17(r.log_pi),
                fmt17(r.lhs26),
                fmt17(r.lost_raw),
                r.support_size.to_string(),
            ];
            row.extend(r.derivs.iter().map(|&d| fmt17(d)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Two columns `log n, log Pi_n` for `n >= 1`.
    pub fn write_plotdata<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "log_n,log_pi")?;
        for r in self.records.iter().skip(1) {
            writeln!(out, "{},{}", fmt17((r.n as f64).ln()), fmt17(r.log_pi))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Identity26 {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::two_point_critical;

    fn m(m: u32) -> ModelParams {
        ModelParams::new(m).unwrap()
    }

    fn raw_close(law: &TiltedLaw, want: &[f64], tol: f64) {
        let got = law.raw_probs();
        assert_eq!(got.len(), want.len(), "{got:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn convolve_identity_and_shift() {
        let d0 = TiltedLaw::point_mass(0, m(2));
        let d1 = TiltedLaw::point_mass(1, m(2));
        let law = two_point_critical(2, m(2)).unwrap();
        assert_eq!(convolve(&d0, &law, ConvStrategy::Auto).unwrap().weights(), law.weights());
        let d2 = convolve(&d1, &d1, ConvStrategy::Auto).unwrap();
        assert_eq!(d2.weights(), &[0.0, 0.0, 4.0]);
        let sq = convolve(&law, &law, ConvStrategy::Auto).unwrap();
        raw_close(&sq, &[16.0 / 25.0, 0.0, 8.0 / 25.0, 0.0, 1.0 / 25.0], 1e-15);
        assert!(convolve(&law, &TiltedLaw::point_mass(0, m(3)), ConvStrategy::Auto).is_err());
    }

    #[test]
    fn m_fold_sum_cases() {
        let d1 = TiltedLaw::point_mass(1, m(3));
        let s = m_fold_sum(&d1, ConvStrategy::Auto);
        assert_eq!(s.support_max(), 3);
        assert!((s.raw_prob(3) - 1.0).abs() < 1e-15);

        let law = two_point_critical(2, m(2)).unwrap();
        let s = m_fold_sum(&law, ConvStrategy::Auto);
        raw_close(&s, &[16.0 / 25.0, 0.0, 8.0 / 25.0, 0.0, 1.0 / 25.0], 1e-15);
    }

    #[test]
    fn m_fold_matches_successive_convolutions() {
        for mm in 2..=7u32 {
            let p = m(mm);
            let law = TiltedLaw::from_raw(&[0.5, 0.2, 0.1, 0.2], p).unwrap();
            let fast = m_fold_sum(&law, ConvStrategy::Auto);
            let mut slow = law.clone();
            for _ in 1..mm {
                slow = convolve(&slow, &law, ConvStrategy::Direct).unwrap();
            }
            assert_eq!(fast.support_size(), slow.support_size());
            for (a, b) in fast.weights().iter().zip(slow.weights()) {
                assert!((a - b).abs() <= 1e-12 * b.abs(), "m = {mm}");
            }
        }
    }

    #[test]
    fn fixed_points() {
        let cfg = EvolveConfig::default();
        for mm in 2..=4 {
            let d0 = TiltedLaw::point_mass(0, m(mm));
            assert_eq!(dr_step(&d0, &cfg).unwrap(), d0);
        }
        let d1 = TiltedLaw::point_mass(1, m(2));
        let next = dr_step(&d1, &cfg).unwrap();
        assert_eq!(next.support_max(), 1);
        assert!((next.raw_prob(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn critical_fixture_step() {
        let law = two_point_critical(2, m(2)).unwrap();
        let next = dr_step(&law, &EvolveConfig::default()).unwrap();
        raw_close(&next, &[16.0 / 25.0, 8.0 / 25.0, 0.0, 1.0 / 25.0], 1e-14);
        assert!((next.tilted_mass() - 1.6).abs() < 1e-14);
        assert!(next.eta().abs() < 1e-14);
    }

    #[test]
    fn subcritical_trace() {
        let law = TiltedLaw::from_raw(&[0.9, 0.0, 0.1], m(2)).unwrap();
        let trace = evolve(&law, &EvolveConfig::with_n_max(1), "subcritical").unwrap();
        let r1 = &trace.records[1];
        assert!((r1.p_zero - 0.81).abs() < 1e-15);
        assert!((trace.product_pi(1).unwrap().1 - 1.3).abs() < 1e-14);
        let id = trace.verify_identity_26(1).unwrap();
        assert!((id.lhs - 0.65).abs() < 1e-14);
        assert!((id.rhs - 0.65).abs() < 1e-14);
        assert_eq!(trace.product_pi(0).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn point_mass_zero_trace() {
        let law = TiltedLaw::point_mass(0, m(2));
        let trace = evolve(&law, &EvolveConfig::with_n_max(5), "delta0").unwrap();
        assert_eq!(trace.records.len(), 6);
        for r in &trace.records {
            assert_eq!(r.log_pi, 0.0);
            assert_eq!(trace.free_energy_upper(r.n).unwrap(), 0.0);
        }
    }

    #[test]
    fn free_energy_of_fixed_point_one() {
        let law = TiltedLaw::point_mass(1, m(2));
        let trace = evolve(&law, &EvolveConfig::with_n_max(6), "delta1").unwrap();
        for n in 0..=6 {
            assert!((trace.free_energy_upper(n).unwrap() - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        let d2 = TiltedLaw::point_mass(2, m(2));
        let trace = evolve(&d2, &EvolveConfig::with_n_max(0), "delta2").unwrap();
        assert_eq!(trace.free_energy_upper(0).unwrap(), 2.0);
    }

    #[test]
    fn support_cap_is_enforced() {
        let law = TiltedLaw::point_mass(3, m(2));
        let cfg = EvolveConfig {
            support_cap: 6,
            tail_epsilon: 0.0,
            ..EvolveConfig::with_n_max(3)
        };
        let err = evolve(&law, &cfg, "delta3").unwrap_err();
        assert!(err.is_numeric_guard());
        assert!(matches!(err, Error::AtGeneration { n: 2, .. }));
    }

    #[test]
    fn truncation_credits_the_ledger() {
        let mut w = vec![1.0, 0.5, 1e-16, 1e-17, 0.0];
        let mut ledger = MassLedger::default();
        truncate_tail(&mut w, 1e-15, 2.0, &mut ledger);
        assert_eq!(w, vec![1.0, 0.5]);
        assert!((ledger.lost_tilted - 1.1e-16).abs() < 1e-30);
        assert!(ledger.lost_raw <= ledger.lost_tilted);
        assert_eq!(ledger.steps_truncated, 1);
    }

    #[test]
    fn csv_layout() {
        let law = two_point_critical(2, m(2)).unwrap();
        let cfg = EvolveConfig {
            k_derivatives: 2,
            ..EvolveConfig::with_n_max(1)
        };
        let trace = evolve(&law, &cfg, "two_point").unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,tilted_mass,tilted_mean,eta,mean,p_zero,log_pi,lhs26,lost_raw,support_size,H1,H2"
        );
        let row1: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row1[0], "1");
        let g: f64 = row1[1].parse().unwrap();
        assert!((g - 1.6).abs() < 1e-14);
        assert_eq!(row1.len(), 12);
    }
}
