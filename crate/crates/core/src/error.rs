use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (only 2 and 4 are supported)")]
    UnsupportedDim(usize),

    #[error("state vector norm {0:e} is below the zero-norm threshold")]
    ZeroNorm(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix has eigenvalue {0:e}, too negative for a PSD square root")]
    TooNegative(f64),

    #[error("initial state kind `{kind}` is incompatible with a dimension-{dim} model")]
    KindMismatch { kind: &'static str, dim: usize },

    #[error("not a valid density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("jump probability {p:e} at t = {t} violates the single-jump-per-step bound |p| < 1")]
    StepTooLarge { t: f64, p: f64 },

    #[error("truncation level population {sum:e} at t = {t} exceeds threshold {threshold:e}; raise the truncation level")]
    TruncationOverflow { t: f64, sum: f64, threshold: f64 },

    #[error("density matrix lost positivity at t = {t} (min eigenvalue {min_eig:e})")]
    PositivityBreach { t: f64, min_eig: f64 },

    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the numerical guards that abort a run mid-flight.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::StepTooLarge { .. }
                | Error::TruncationOverflow { .. }
                | Error::PositivityBreach { .. }
        )
    }

    /// True for configuration and validation problems.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownPreset(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
