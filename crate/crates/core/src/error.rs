use thiserror::Error;

/// Errors produced by the solvers and their supporting machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// The stationary operating point could not be found.
    #[error("steady-state iteration did not converge: {0}")]
    NoConvergence(String),

    /// The linearized drift matrix has an eigenvalue with positive real part.
    #[error("linearized dynamics are unstable (max Re λ = {max_real:.3e})")]
    Unstable { max_real: f64 },

    /// The adaptive step size collapsed below the floor.
    #[error("integration step failed at t = {t}: step size {h:.3e} ({reason})")]
    StepFailure { t: f64, h: f64, reason: String },

    /// A covariance matrix left the physical set.
    #[error("unphysical covariance at t = {t}: smallest symplectic eigenvalue {nu_min:.12}")]
    UnphysicalState { t: f64, nu_min: f64 },

    /// Symplectic eigenvalues failed to pair, or the input was not positive semidefinite.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Population at the top Fock level of some mode exceeded the leak threshold.
    #[error("truncation leak at t = {t}: mode {mode} top-level population {population:.3e}")]
    TruncationLeak {
        t: f64,
        mode: usize,
        population: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
