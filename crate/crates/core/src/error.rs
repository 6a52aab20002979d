use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent grids, spacings or scale ranges.
    #[error("configuration error: {0}")]
    Config(String),
    /// Out-of-range numeric parameters (exponents, arities, heights).
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A guard band or cube family left nothing to work with.
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    /// A kernel produced a non-finite value.
    #[error("kernel error: {0}")]
    Kernel(String),
    /// An input violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A caller-asserted structural contract does not hold.
    #[error("contract violated: {0}")]
    Contract(String),
    /// A cube average of the weight vanished.
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),
    /// The requested evaluation exceeds the configured work cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A numerical self-check failed (for example an FFT imaginary residue).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
