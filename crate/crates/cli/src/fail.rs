use std::fmt;

/// Why a command did not succeed; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or config: exit 1.
    Usage(String),
    /// Error from the engine: exit 3 for numeric guards, 1 otherwise.
    Core(dr_core::Error),
    /// One or more checks failed: exit 2.
    Checks(Vec<String>),
}

pub type Outcome<T> = Result<T, Failure>;

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_numeric_guard() => 3,
            Failure::Core(_) => 1,
            Failure::Checks(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::Core(e) if e.is_numeric_guard() => write!(f, "numeric guard: {e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Checks(names) => write!(f, "failed checks: {}", names.join(", ")),
        }
    }
}

impl From<dr_core::Error> for Failure {
    fn from(e: dr_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}
