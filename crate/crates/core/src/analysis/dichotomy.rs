//! The two-branch alternative for large `n`: either the window product
//! `A_n = prod_{i in (n/2, n]} G_i(m)^(m-1)` is at least 8, or the full
//! product `B_n = prod_{i=0}^{n} G_i(m)^(m-1)` is at least `c n^(alpha-2)`.

use serde::{Deserialize, Serialize};

use super::log_factors;
use crate::error::{Error, Result};
use crate::evolve::EvolutionTrace;

pub const WINDOW_THRESHOLD: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma52Point {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    /// `A_n >= 8`.
    pub window_branch: bool,
    /// `B_n >= c n^(alpha-2)`.
    pub growth_branch: bool,
}

impl Lemma52Point {
    pub fn holds(&self) -> bool {
        self.window_branch || self.growth_branch
    }
}

/// `(ln A_n, ln B_n)` from prefix sums of the log factors.
fn window_logs(prefix: &[f64], n: usize) -> (f64, f64) {
    // prefix[j] = sum_{i<j} log factor
    let b = prefix[n + 1];
    let a = b - prefix[n / 2 + 1];
    (a, b)
}

fn prefix_sums(trace: &EvolutionTrace) -> Vec<f64> {
    let mut prefix = vec![0.0];
    let mut acc = 0.0;
    for f in log_factors(trace) {
        acc += f;
        prefix.push(acc);
    }
    prefix
}

pub fn lemma52_dichotomy(trace: &EvolutionTrace, n: usize, alpha: f64, c: f64) -> Result<Lemma52Point> {
    if n < 1 || n > trace.n_max() {
        return Err(Error::GenerationOutOfRange {
            n,
            n_max: trace.n_max(),
        });
    }
    let (la, lb) = window_logs(&prefix_sums(trace), n);
    Ok(point(n, la, lb, alpha, c))
}

fn point(n: usize, la: f64, lb: f64, alpha: f64, c: f64) -> Lemma52Point {
    let (a, b) = (la.exp(), lb.exp());
    Lemma52Point {
        n,
        a,
        b,
        window_branch: a >= WINDOW_THRESHOLD,
        growth_branch: c > 0.0 && lb >= c.ln() + (alpha - 2.0) * (n as f64).ln(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma52Report {
    pub alpha: f64,
    /// Constant in the growth branch, fitted or given.
    pub c_hat: f64,
    pub points: Vec<Lemma52Point>,
    /// First `n` from which the alternative holds at every later recorded `n`.
    pub n0: Option<usize>,
    /// `B_n` never moved off 1 (no mass at `k >= 2`); neither branch can hold.
    pub degenerate: bool,
}

/// Evaluates the alternative at every `n = 1..=n_max`.
///
/// Without a given constant, `c_hat = min B_n / n^(alpha-2)` over the upper
/// half `n > n_max / 2` of the run.
pub fn lemma52_report(trace: &EvolutionTrace, alpha: f64, c: Option<f64>) -> Result<Lemma52Report> {
    let n_max = trace.n_max();
    if n_max < 2 {
        return Err(Error::InvalidParameter(
            "dichotomy report needs at least 2 generations".into(),
        ));
    }
    let prefix = prefix_sums(trace);
    let logs: Vec<(usize, f64, f64)> = (1..=n_max)
        .map(|n| {
            let (a, b) = window_logs(&prefix, n);
            (n, a, b)
        })
        .collect();
    let degenerate = logs.iter().all(|&(_, _, b)| b == 0.0);
    let c_hat = match c {
        Some(c) => c,
        None if degenerate => 0.0,
        None => logs
            .iter()
            .filter(|(n, _, _)| *n > n_max / 2)
            .map(|&(n, _, b)| (b - (alpha - 2.0) * (n as f64).ln()).exp())
            .fold(f64::INFINITY, f64::min),
    };
    let points: Vec<Lemma52Point> = logs
        .iter()
        .map(|&(n, a, b)| point(n, a, b, alpha, c_hat))
        .collect();
    let n0 = match points.iter().rposition(|p| !p.holds()) {
        None => Some(1),
        Some(i) if i + 1 < points.len() => Some(points[i + 1].n),
        Some(_) => None,
    };
    Ok(Lemma52Report {
        alpha,
        c_hat,
        points,
        n0: if degenerate { None } else { n0 },
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve, EvolveConfig};
    use crate::law::{ModelParams, TiltedLaw};

    #[test]
    fn point_mass_is_degenerate() {
        let law = TiltedLaw::point_mass(0, ModelParams::new(2).unwrap());
        let t = evolve(&law, &EvolveConfig::with_n_max(16), "d0").unwrap();
        let r = lemma52_report(&t, 3.0, None).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.n0, None);
        assert!(r.points.iter().all(|p| p.a == 1.0 && p.b == 1.0 && !p.holds()));
    }

    #[test]
    fn window_at_n2_is_single_index() {
        let mut t = crate::analysis::synthetic(4, |_| 0.0);
        for (i, r) in t.records.iter_mut().enumerate() {
            r.tilted_mass = (i + 2) as f64;
        }
        let p = lemma52_dichotomy(&t, 2, 3.0, 1.0).unwrap();
        assert!((p.a - 4.0).abs() < 1e-14);
        assert!((p.b - 24.0).abs() < 1e-12);
        let p = lemma52_dichotomy(&t, 4, 3.0, 1.0).unwrap();
        // i in (2, 4] = {3, 4}
        assert!((p.a - 30.0).abs() < 1e-12);
        assert!(p.window_branch);
    }
}
