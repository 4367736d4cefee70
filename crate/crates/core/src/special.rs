//! Riemann zeta and polylogarithm values used for the infinite-support limit
//! of the critical stable family.

use crate::sum::NeumaierSum;

const EM_CUTOFF: u32 = 16;

/// `B_2j / (2j)!` for j = 1..=6.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
];

/// `zeta(s)` for real `s > 1`: a direct head sum plus an Euler-Maclaurin
/// tail.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta(s) requires s > 1, got {s}");
    let n = EM_CUTOFF as f64;
    let mut acc = NeumaierSum::new();
    for k in (1..EM_CUTOFF).rev() {
        acc.add((k as f64).powf(-s));
    }
    acc.add(n.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * n.powf(-s));
    // j-th correction: B_2j / (2j)! * s (s+1) ... (s+2j-2) * N^(-s-2j+1)
    let mut rising = s;
    for (j, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let order = (2 * j + 1) as f64;
        acc.add(coeff * rising * n.powf(-s - order));
        rising *= (s + order) * (s + order + 1.0);
    }
    acc.value()
}

/// `Li_s(z) = sum_{k>=1} z^k / k^s` for `0 <= z < 1`, summed until the term
/// drops below `1e-16` of the running sum.
pub fn polylog(s: f64, z: f64) -> f64 {
    assert!((0.0..1.0).contains(&z), "polylog needs 0 <= z < 1, got {z}");
    let mut acc = NeumaierSum::new();
    let mut zk = 1.0;
    let mut k = 1u64;
    loop {
        zk *= z;
        let term = zk * (k as f64).powf(-s);
        acc.add(term);
        if term <= 1e-16 * acc.value().abs() || zk == 0.0 {
            break;
        }
        k += 1;
    }
    acc.value()
}
