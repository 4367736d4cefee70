use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::EvolutionTrace;

/// Least-squares line through `(log n, log Pi_n)` at dyadic `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub n_lo: usize,
    pub n_hi: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
    /// Exponent the slope is compared against.
    pub target: f64,
}

impl PowerLawFit {
    pub fn abs_err(&self) -> f64 {
        (self.slope - self.target).abs()
    }
}

/// Fits `log y = slope log x + intercept` by ordinary least squares.
pub fn fit_log_log(xs: &[f64], log_ys: &[f64], target: f64) -> Result<PowerLawFit> {
    if xs.len() != log_ys.len() {
        return Err(Error::InvalidParameter(format!(
            "fit needs matching lengths, got {} and {}",
            xs.len(),
            log_ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::WindowTooSmall { points: xs.len() });
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = log_ys.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(log_ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(log_ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(PowerLawFit {
        n_lo: xs[0] as usize,
        n_hi: *xs.last().unwrap() as usize,
        slope,
        intercept,
        max_residual,
        target,
    })
}

/// Slope of `log Pi_n` against `log n` over `n = n_lo, 2 n_lo, 4 n_lo, ... <= n_hi`.
pub fn fit_power_law(
    trace: &EvolutionTrace,
    n_lo: usize,
    n_hi: usize,
    target: f64,
) -> Result<PowerLawFit> {
    if n_lo < 8 {
        return Err(Error::InvalidParameter(format!(
            "fit window must start at n >= 8, got {n_lo}"
        )));
    }
    if n_hi > trace.n_max() {
        return Err(Error::GenerationOutOfRange {
            n: n_hi,
            n_max: trace.n_max(),
        });
    }
    let ns: Vec<usize> = std::iter::successors(Some(n_lo), |&n| Some(2 * n))
        .take_while(|&n| n <= n_hi)
        .collect();
    if ns.len() < 3 {
        return Err(Error::WindowTooSmall { points: ns.len() });
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| trace.records[n].log_pi).collect();
    let mut fit = fit_log_log(&xs, &ys, target)?;
    fit.n_hi = *ns.last().unwrap();
    Ok(fit)
}

/// `sup_{n >= n_lo} Pi_n / n^p`, e.g. the constant in `Pi_n <= c n^2`.
pub fn sup_ratio_to_power(trace: &EvolutionTrace, p: f64, n_lo: usize) -> f64 {
    trace
        .records
        .iter()
        .skip(n_lo.max(1))
        .map(|r| (r.log_pi - p * (r.n as f64).ln()).exp())
        .fold(0.0, f64::max)
}
