//! The combinatorial sum over `B_l = {u in [0, l-1]^m : u_1 + ... + u_m = l}`:
//!
//! ```text
//! sum_{u in B_l} y^((l - eta(u) - 2)^+) prod_{i : u_i >= 3} 1 / (u_i (u_i - 1)),
//! ```
//!
//! with `eta(u) = #{i : u_i >= 1}`. Evaluated in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ENUM_L: u32 = 20;
pub const MAX_ENUM_M: u32 = 5;

/// How `B_l` is walked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enumeration {
    /// Every ordered tuple.
    Full,
    /// Non-increasing tuples, each weighted by its number of orderings.
    Sorted,
}

fn check_sizes(l: u32, m: u32) -> Result<()> {
    if l < 4 {
        return Err(Error::InvalidParameter(format!("l must be >= 4, got {l}")));
    }
    if m < 2 {
        return Err(Error::BadBranching(m));
    }
    if l > MAX_ENUM_L || m > MAX_ENUM_M {
        return Err(Error::EnumerationTooLarge { l, m });
    }
    Ok(())
}

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn term(u: &[u32], l: u32, y: &BigRational) -> BigRational {
    let eta = u.iter().filter(|&&x| x >= 1).count() as i64;
    let e = (l as i64 - eta - 2).max(0);
    let mut t = num_traits::pow(y.clone(), e as usize);
    for &x in u.iter().filter(|&&x| x >= 3) {
        t /= int(x as u64 * (x as u64 - 1));
    }
    t
}

fn walk_full(u: &mut Vec<u32>, left: u32, m: usize, l: u32, y: &BigRational, acc: &mut BigRational) {
    if u.len() == m - 1 {
        if left <= l - 1 {
            u.push(left);
            *acc += term(u, l, y);
            u.pop();
        }
        return;
    }
    for x in 0..=left.min(l - 1) {
        u.push(x);
        walk_full(u, left - x, m, l, y, acc);
        u.pop();
    }
}

/// Number of distinct orderings of `u`.
fn orderings(u: &[u32]) -> u64 {
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    let mut out = fact(u.len());
    let mut i = 0;
    while i < u.len() {
        let j = (i..u.len()).find(|&j| u[j] != u[i]).unwrap_or(u.len());
        out /= fact(j - i);
        i = j;
    }
    out
}

fn walk_sorted(
    u: &mut Vec<u32>,
    left: u32,
    cap: u32,
    m: usize,
    l: u32,
    y: &BigRational,
    acc: &mut BigRational,
) {
    if u.len() == m {
        if left == 0 {
            *acc += term(u, l, y) * int(orderings(u));
        }
        return;
    }
    let slots = (m - u.len()) as u32;
    if left > cap * slots {
        return;
    }
    for x in (0..=cap.min(left)).rev() {
        u.push(x);
        walk_sorted(u, left - x, x, m, l, y, acc);
        u.pop();
    }
}

/// Exact left-hand side, for `4 <= l <= 20` and `2 <= m <= 5`.
pub fn lemma27_lhs_exact(l: u32, m: u32, y: &BigRational, how: Enumeration) -> Result<BigRational> {
    check_sizes(l, m)?;
    if !(y > &BigRational::zero()) {
        return Err(Error::InvalidParameter("y must be > 0".into()));
    }
    let mut acc = BigRational::zero();
    let mut u = Vec::with_capacity(m as usize);
    match how {
        Enumeration::Full => walk_full(&mut u, l, m as usize, l, y, &mut acc),
        Enumeration::Sorted => walk_sorted(&mut u, l, l - 1, m as usize, l, y, &mut acc),
    }
    Ok(acc)
}

fn to_rational(y: f64) -> Result<BigRational> {
    BigRational::from_float(y)
        .filter(|r| r > &BigRational::zero())
        .ok_or_else(|| Error::InvalidParameter(format!("y must be finite and > 0, got {y}")))
}

/// [`lemma27_lhs_exact`] for a float `y`, rounded once at the end.
pub fn lemma27_lhs(l: u32, m: u32, y: f64) -> Result<f64> {
    let y = to_rational(y)?;
    Ok(lemma27_lhs_exact(l, m, &y, Enumeration::Sorted)?
        .to_f64()
        .unwrap_or(f64::INFINITY))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma27Point {
    pub l: u32,
    pub y: f64,
    pub lhs: f64,
    /// `lhs l^2 / y^(l-4)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma27Scan {
    pub m: u32,
    pub points: Vec<Lemma27Point>,
    /// Maximum ratio over the grid.
    pub c18_hat: f64,
}

impl Lemma27Scan {
    /// Largest ratio with `l` in `[l_lo, l_hi]`.
    pub fn max_ratio_over(&self, l_lo: u32, l_hi: u32) -> f64 {
        self.points
            .iter()
            .filter(|p| (l_lo..=l_hi).contains(&p.l))
            .map(|p| p.ratio)
            .fold(0.0, f64::max)
    }

    /// Largest ratio at one `y`, over `l` in `[l_lo, l_hi]`.
    pub fn max_ratio_at(&self, y: f64, l_lo: u32, l_hi: u32) -> f64 {
        self.points
            .iter()
            .filter(|p| p.y == y && (l_lo..=l_hi).contains(&p.l))
            .map(|p| p.ratio)
            .fold(0.0, f64::max)
    }
}

/// Evaluates `lhs l^2 / y^(l-4)` for `l = 4..=l_max` and every `y`, which must
/// all satisfy `y >= 3m`.
pub fn lemma27_scan(m: u32, l_max: u32, ys: &[f64]) -> Result<Lemma27Scan> {
    let min = 3.0 * m as f64;
    if let Some(&y) = ys.iter().find(|&&y| !(y >= min)) {
        return Err(Error::HypothesisViolated { y, min });
    }
    check_sizes(l_max, m)?;
    let mut points = Vec::new();
    for &y in ys {
        let yr = to_rational(y)?;
        for l in 4..=l_max {
            let lhs = lemma27_lhs_exact(l, m, &yr, Enumeration::Sorted)?;
            let ratio = &lhs * int((l * l) as u64) / num_traits::pow(yr.clone(), (l - 4) as usize);
            points.push(Lemma27Point {
                l,
                y,
                lhs: lhs.to_f64().unwrap_or(f64::INFINITY),
                ratio: ratio.to_f64().unwrap_or(f64::INFINITY),
            });
        }
    }
    let c18_hat = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(Lemma27Scan { m, points, c18_hat })
}
