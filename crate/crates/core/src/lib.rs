//! Exact evolution of integer-valued laws under the recursion
//!
//! ```text
//! X_{n+1} = (X_{n,1} + ... + X_{n,m} - 1)^+,
//! ```
//!
//! where `X_{n,1}, ..., X_{n,m}` are independent copies of `X_n`, together
//! with checks of the bounds its evolutions satisfy.
//!
//! Laws are stored as tilted weights `w_k = P(X = k) m^k`, in which the
//! quantities of interest (`E(m^X)`, `E(X m^X)`, the criticality parameter)
//! are plain sums, and one step of the recursion is an `m`-fold convolution
//! followed by a shift.
//!
//! ```
//! use dr_core::{evolve, two_point_critical, EvolveConfig, ModelParams};
//!
//! let law = two_point_critical(2, ModelParams::new(2)?)?;
//! let trace = evolve(&law, &EvolveConfig::with_n_max(64), "two-point")?;
//! let (log_pi, _) = trace.product_pi(64)?;
//! assert!(log_pi > 0.0);
//! # Ok::<(), dr_core::Error>(())
//! ```

pub mod analysis;
pub mod conv;
pub mod error;
pub mod evolve;
pub mod exact;
pub mod families;
pub mod law;
pub mod mc;
pub mod special;
pub mod sum;

pub use conv::ConvStrategy;
pub use error::{Error, Result};
pub use evolve::{dr_step, evolve, evolve_with, EvolutionTrace, EvolveConfig, StepRecord};
pub use exact::RationalLaw;
pub use families::{stable_critical_init, truncate_initial, two_point_critical, TruncationMode};
pub use law::{MassLedger, ModelParams, TiltedLaw};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/tilted-laws.md")]
    mod tilted_laws {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/initial-laws.md")]
    mod initial_laws {}
    #[doc = include_str!("../../../book/src/precision.md")]
    mod precision {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
