use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("atom number must be at least 1, got {0}")]
    InvalidAtomCount(f64),

    #[error("invalid density profile: {0}")]
    InvalidProfile(String),

    #[error("alpha = {alpha} is not an odd integer in [-{n}, {n})")]
    InvalidAlpha { alpha: i64, n: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("series did not reach tolerance within {max_terms} terms (needs {needed})")]
    SeriesNotConverged { needed: usize, max_terms: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}
