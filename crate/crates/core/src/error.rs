use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("branching factor must be at least 2, got {0}")]
    BadBranching(u32),

    #[error("probabilities sum to {sum}, expected 1 within 1e-12")]
    NonNormalized { sum: f64 },

    #[error("negative mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible stable family: p0 = {p0}, c = {c}")]
    InfeasibleFamily { p0: f64, c: f64 },

    #[error("tilt point s = {s} must exceed m = {m}")]
    BadTiltPoint { s: f64, m: u32 },

    #[error("support size {size} exceeds cap {cap}")]
    SupportOverflow { size: usize, cap: usize },

    #[error("pgf recursion check failed: tilted mass {got}, expected {expected}")]
    PgfCheckFailed { expected: f64, got: f64 },

    #[error("generation {n}: {source}")]
    AtGeneration {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trace recorded derivatives up to order {have}, need {need}")]
    MissingDerivatives { have: usize, need: usize },

    #[error("generation {n} is past the end of the trace (n_max = {n_max})")]
    GenerationOutOfRange { n: usize, n_max: usize },

    #[error("law is not strictly subcritical (eta = {eta})")]
    NotSubcritical { eta: f64 },

    #[error("tilt point s = {s} must lie in (m/2, m) = ({lo}, {hi})")]
    TiltOutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("Delta_0(s) = {value} is not positive")]
    DegenerateDelta { value: f64 },

    #[error("y = {y} violates the hypothesis y >= 3m = {min}")]
    HypothesisViolated { y: f64, min: f64 },

    #[error("enumeration too large: l = {l}, m = {m} (caps: l <= 20, m <= 5)")]
    EnumerationTooLarge { l: u32, m: u32 },

    #[error("fit window holds {points} dyadic points, need at least 3")]
    WindowTooSmall { points: usize },

    #[error("theta is not non-decreasing: theta({m_lo}) = {theta_lo} > theta({m_hi}) = {theta_hi}")]
    ThetaNotMonotone {
        m_lo: u64,
        theta_lo: f64,
        m_hi: u64,
        theta_hi: f64,
    },

    #[error("tree too deep: m^n = {m}^{n} exceeds 2^26 leaf draws")]
    TreeTooDeep { m: u32, n: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numeric machinery (support blow-up, pgf
    /// identity drift) as opposed to bad inputs.
    pub fn is_numeric_guard(&self) -> bool {
        match self {
            Error::SupportOverflow { .. } | Error::PgfCheckFailed { .. } => true,
            Error::AtGeneration { source, .. } => source.is_numeric_guard(),
            _ => false,
        }
    }

    pub(crate) fn at_generation(n: usize, source: Error) -> Self {
        Error::AtGeneration {
            n,
            source: Box::new(source),
        }
    }
}
