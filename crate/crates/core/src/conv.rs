//! Convolution of tilted weight vectors.
//!
//! Tilted weights of independent sums multiply like polynomial coefficients
//! (`m^j m^(k-j) = m^k`), so the law of `X_1 + X_2` is the plain convolution of
//! the two weight vectors.
//!
//! Small inputs use schoolbook convolution. Large inputs use a *split
//! transform*: heavy-tailed laws have weights spanning 10^-20 .. 1, and a
//! single FFT adds absolute noise of order `eps * ||a|| ||b||` to every output
//! bin, which swamps the tail. Instead the indices are cut into dyadic blocks
//! `[t_j, 2 t_j)` and
//!
//! ```text
//! a * b = sum_j  A_j * b[0 .. t_{j+1})  +  a[0 .. t_j) * B_j
//! ```
//!
//! where `A_j`, `B_j` are the block restrictions. Each term's round-off scales
//! with the block's own magnitude, so the relative accuracy of a tail bin is
//! set by the weights near it rather than by the head of the law. The head
//! block is always convolved directly.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Support size below which [`ConvStrategy::Auto`] uses direct convolution.
pub const DIRECT_THRESHOLD: usize = 4096;

/// Width of the head block handled directly inside the split transform.
const HEAD_BLOCK: usize = 2048;

/// Negative round-off up to this fraction of the largest output weight is
/// zeroed; anything larger indicates a precision failure and is kept so
/// downstream checks catch it.
pub const CLAMP_REL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvStrategy {
    Direct,
    Transform,
    #[default]
    Auto,
}

impl std::str::FromStr for ConvStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Self::Direct),
            "transform" => Ok(Self::Transform),
            "auto" => Ok(Self::Auto),
            _ => Err(format!("unknown convolution strategy `{s}`")),
        }
    }
}

/// Output of a convolution: the weights and the tilted mass added by zeroing
/// negative round-off.
#[derive(Clone, Debug)]
pub struct Convolved {
    pub weights: Vec<f64>,
    pub clamped: f64,
}

fn use_direct(strategy: ConvStrategy, la: usize, lb: usize) -> bool {
    match strategy {
        ConvStrategy::Direct => true,
        ConvStrategy::Transform => la.min(lb) <= 1,
        ConvStrategy::Auto => la.max(lb) < DIRECT_THRESHOLD || la.min(lb) <= 32,
    }
}

/// `a * b`.
pub fn convolve(a: &[f64], b: &[f64], strategy: ConvStrategy) -> Convolved {
    if a.is_empty() || b.is_empty() {
        return Convolved {
            weights: Vec::new(),
            clamped: 0.0,
        };
    }
    if use_direct(strategy, a.len(), b.len()) {
        return Convolved {
            weights: direct(a, b),
            clamped: 0.0,
        };
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    let n = a.len().max(b.len());
    let head = HEAD_BLOCK.min(n);
    // block 0: A_0 * b[0..t_1), with a[0..0) * B_0 empty
    add_direct(&mut out, 0, &a[..head.min(a.len())], &b[..head.min(b.len())]);
    let mut lo = head;
    while lo < n {
        let hi = (2 * lo).min(n);
        // A_j * b[0..hi)
        if lo < a.len() {
            let blk = &a[lo..hi.min(a.len())];
            let pre = &b[..hi.min(b.len())];
            add_fft(&mut out, lo, blk, pre);
        }
        // a[0..lo) * B_j
        if lo < b.len() {
            let blk = &b[lo..hi.min(b.len())];
            let pre = &a[..lo.min(a.len())];
            add_fft(&mut out, lo, blk, pre);
        }
        lo = hi;
    }
    clamp(out)
}

/// `a * a`, using `a * a = sum_j A_j * (2 a[0..t_j) + A_j)`.
pub fn self_convolve(a: &[f64], strategy: ConvStrategy) -> Convolved {
    if a.is_empty() {
        return Convolved {
            weights: Vec::new(),
            clamped: 0.0,
        };
    }
    if use_direct(strategy, a.len(), a.len()) {
        return Convolved {
            weights: direct(a, a),
            clamped: 0.0,
        };
    }
    let n = a.len();
    let mut out = vec![0.0; 2 * n - 1];
    let head = HEAD_BLOCK.min(n);
    add_direct(&mut out, 0, &a[..head], &a[..head]);
    let mut lo = head;
    let mut pre = Vec::with_capacity(n);
    while lo < n {
        let hi = (2 * lo).min(n);
        pre.clear();
        pre.extend(a[..lo].iter().map(|x| 2.0 * x));
        pre.extend_from_slice(&a[lo..hi]);
        add_fft(&mut out, lo, &a[lo..hi], &pre);
        lo = hi;
    }
    clamp(out)
}

fn clamp(mut out: Vec<f64>) -> Convolved {
    let max = out.iter().copied().fold(0.0, f64::max);
    let floor = -CLAMP_REL * max;
    let mut clamped = 0.0;
    for x in out.iter_mut() {
        if *x < 0.0 && *x >= floor {
            clamped -= *x;
            *x = 0.0;
        }
    }
    Convolved {
        weights: out,
        clamped,
    }
}

/// Schoolbook convolution.
pub fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    add_direct(&mut out, 0, a, b);
    out
}

fn add_direct(out: &mut [f64], offset: usize, a: &[f64], b: &[f64]) {
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let dst = &mut out[offset + i..offset + i + b.len()];
        for (d, &y) in dst.iter_mut().zip(b) {
            *d += x * y;
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Adds `a * b` into `out[offset..]` with one complex transform pair: both
/// real inputs are packed as `a + i b`.
fn add_fft(out: &mut [f64], offset: usize, a: &[f64], b: &[f64]) {
    if a.is_empty() || b.is_empty() {
        return;
    }
    let len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        add_direct(out, offset, a, b);
        return;
    }
    // Packing separates the two spectra by symmetry, which cancels at the
    // scale of the larger input; equalize the norms first.
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let rescale = nb / na;
    let n = len.next_power_of_two();
    let (fwd, inv) = plans(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (z, &x) in buf.iter_mut().zip(a) {
        z.re = x * rescale;
    }
    for (z, &y) in buf.iter_mut().zip(b) {
        z.im = y;
    }
    fwd.process(&mut buf);
    // A_k = (Z_k + conj Z_{-k}) / 2, B_k = (Z_k - conj Z_{-k}) / 2i,
    // A_k B_k = (Z_k^2 - conj(Z_{-k})^2) / 4i
    let mut prod = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let zk = buf[k];
        let zc = buf[(n - k) % n].conj();
        prod[k] = (zk * zk - zc * zc) * Complex64::new(0.0, -0.25);
    }
    inv.process(&mut prod);
    let scale = 1.0 / (n as f64 * rescale);
    for (d, z) in out[offset..offset + len].iter_mut().zip(&prod) {
        *d += z.re * scale;
    }
}
