//! Numerical checks of the bounds satisfied by evolutions.
//!
//! The bounds are existence statements ("there is a constant `c` such
//! that ..."), so each check returns the smallest constant that makes the
//! inequality hold over the tested grid. Whether that constant is stable is
//! a question for the caller.

mod derivatives;
mod dichotomy;
mod dominability;
mod enumeration;
mod fit;
mod products;
mod report;

pub use derivatives::{
    corollary24_check, theorem23_check, Corollary24, Lemma25, SuperTiltProbe, Theorem23,
    lemma25_check,
};
pub use dichotomy::{WINDOW_THRESHOLD, lemma52_dichotomy, lemma52_report, Lemma52Point, Lemma52Report};
pub use dominability::{
    check_dominability, finite_variance_builder, stable_builder, DominabilityCertificate,
    DominabilityPass, DominabilityRow, DominableFamily, TruncationFamily,
};
pub use enumeration::{
    lemma27_lhs, lemma27_lhs_exact, lemma27_scan, Enumeration, Lemma27Point, Lemma27Scan,
    MAX_ENUM_L, MAX_ENUM_M,
};
pub use fit::{fit_log_log, fit_power_law, sup_ratio_to_power, PowerLawFit};
pub use products::{
    delta0, identity41_max_rel_err, lemma42_bound, lemma42_check, lemma51_bound, truncation_gap,
    Lemma42Report, Lemma51, TruncationGap,
};
pub use report::Report;

use crate::evolve::EvolutionTrace;

/// `n v M`, kept at least 1 so powers with negative exponents stay finite.
pub(crate) fn n_or_m(n: usize, big_m: usize) -> f64 {
    n.max(big_m).max(1) as f64
}

/// `ln G_i(m)^(m-1)` for every recorded generation.
pub(crate) fn log_factors(trace: &EvolutionTrace) -> Vec<f64> {
    let mm1 = trace.params.mf() - 1.0;
    trace
        .records
        .iter()
        .map(|r| mm1 * r.tilted_mass.ln())
        .collect()
}

/// A trace with unit tilted masses and the given `log Pi_n`.
#[cfg(test)]
pub(crate) fn synthetic(n_max: usize, log_pi: impl Fn(usize) -> f64) -> EvolutionTrace {
    use crate::evolve::{EvolveConfig, StepRecord};
    let records = (0..=n_max)
        .map(|n| StepRecord {
            n,
            tilted_mass: 1.0,
            tilted_mean: 0.0,
            eta: 0.0,
            mean: 0.0,
            p_zero: 1.0,
            log_pi: log_pi(n),
            derivs: vec![],
            lhs26: 0.0,
            lost_raw: 0.0,
            support_size: 1,
        })
        .collect();
    EvolutionTrace {
        config: EvolveConfig::with_n_max(n_max),
        params: crate::law::ModelParams::new(2).unwrap(),
        initial: "synthetic".into(),
        records,
    }
}
