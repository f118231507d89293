use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid harmonic comb: {0}")]
    InvalidComb(String),

    #[error("basis construction failed: {0}")]
    Basis(String),

    #[error("eigensolver failed for channel l={channel}: {reason}")]
    Eigen { channel: usize, reason: String },

    #[error("basis too small: {0}")]
    BasisTooSmall(String),

    #[error("selection rule violated: dipole coupling requires |l - l'| = 1, got l={0}, l'={1}")]
    SelectionRule(usize, usize),

    #[error("linear solve failed at t = {time:.4} a.u.: {reason}")]
    LinearSolve { time: f64, reason: String },

    #[error("norm drift {drift:.3e} over {steps} steps at t = {time:.4} a.u. exceeds tolerance")]
    NormDrift { drift: f64, steps: usize, time: f64 },

    #[error("peak structure error: {0}")]
    PeakStructure(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
