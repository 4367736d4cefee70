//! Monte Carlo sampling of `X_n` straight from the recursion, as an oracle
//! independent of the convolution engine.
//!
//! A level-`n` value is `(sum of m level-(n-1) values - 1)^+`, with leaves
//! drawn from the initial law; the tree is walked depth first and never
//! stored. Sample `i` draws from its own ChaCha stream `(seed, i)`, and the
//! accumulators are integers, so estimates are bit-identical for any number
//! of worker threads.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::fmt17;
use crate::law::TiltedLaw;

/// Largest number of leaf draws per sample.
pub const MAX_LEAVES: u64 = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: u32,
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n: u32,
    pub samples: u64,
    pub seed: u64,
    pub mean_hat: f64,
    pub stderr_mean: f64,
    pub p_zero_hat: f64,
    pub stderr_p0: f64,
}

/// Draws leaves from the initial law.
pub struct Sampler {
    m: u32,
    leaves: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(law: &TiltedLaw) -> Result<Self> {
        let leaves = WeightedIndex::new(law.raw_probs())
            .map_err(|e| Error::InvalidParameter(format!("cannot sample initial law: {e}")))?;
        Ok(Self { m: law.m(), leaves })
    }

    /// One draw of `X_n`.
    pub fn sample<R: rand::Rng>(&self, n: u32, rng: &mut R) -> u64 {
        if n == 0 {
            return self.leaves.sample(rng) as u64;
        }
        let s: u64 = (0..self.m).map(|_| self.sample(n - 1, rng)).sum();
        s.saturating_sub(1)
    }
}

fn check_depth(m: u32, n: u32) -> Result<()> {
    let leaves = (m as u64).checked_pow(n);
    if leaves.is_none_or(|l| l > MAX_LEAVES) {
        return Err(Error::TreeTooDeep { m, n });
    }
    Ok(())
}

/// One draw of `X_n` using `rng`.
pub fn sample_xn<R: rand::Rng>(law: &TiltedLaw, n: u32, rng: &mut R) -> Result<u64> {
    check_depth(law.m(), n)?;
    Ok(Sampler::new(law)?.sample(n, rng))
}

/// The generator of sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Default)]
struct Acc {
    sum: u128,
    sum_sq: u128,
    zeros: u64,
}

impl Acc {
    fn add(mut self, x: u64) -> Self {
        self.sum += x as u128;
        self.sum_sq += (x as u128) * (x as u128);
        self.zeros += (x == 0) as u64;
        self
    }

    fn merge(self, o: Self) -> Self {
        Self {
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            zeros: self.zeros + o.zeros,
        }
    }
}

/// Sample mean of `X_n` and frequency of `X_n = 0`, with standard errors.
pub fn estimate(law: &TiltedLaw, config: &McConfig) -> Result<McEstimate> {
    if config.samples < 1 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    check_depth(law.m(), config.n)?;
    let sampler = Sampler::new(law)?;
    let run = || {
        (0..config.samples)
            .into_par_iter()
            .map(|i| sampler.sample(config.n, &mut sample_rng(config.seed, i)))
            .fold(Acc::default, Acc::add)
            .reduce(Acc::default, Acc::merge)
    };
    let acc = match config.workers {
        None => run(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
    };
    let n = config.samples as f64;
    let mean_hat = acc.sum as f64 / n;
    let stderr_mean = if config.samples > 1 {
        // N sum x^2 - (sum x)^2 is exact in integers
        let num = config.samples as u128 * acc.sum_sq - acc.sum * acc.sum;
        (num as f64 / (n * (n - 1.0)) / n).sqrt()
    } else {
        0.0
    };
    let p_zero_hat = acc.zeros as f64 / n;
    Ok(McEstimate {
        n: config.n,
        samples: config.samples,
        seed: config.seed,
        mean_hat,
        stderr_mean,
        p_zero_hat,
        stderr_p0: (p_zero_hat * (1.0 - p_zero_hat) / n).sqrt(),
    })
}

pub const CSV_HEADER: [&str; 7] = [
    "n",
    "samples",
    "seed",
    "mean_hat",
    "stderr_mean",
    "p_zero_hat",
    "stderr_p0",
];

impl McEstimate {
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.samples.to_string(),
            self.seed.to_string(),
            fmt17(self.mean_hat),
            fmt17(self.stderr_mean),
            fmt17(self.p_zero_hat),
            fmt17(self.stderr_p0),
        ]
    }
}

pub fn write_csv<W: Write>(estimates: &[McEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for e in estimates {
        w.write_record(e.csv_row())?;
    }
    w.flush()?;
    Ok(())
}
