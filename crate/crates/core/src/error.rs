use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its constraint. `key` is the config-file key.
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParam { key: String, reason: String },

    #[error("a 0-bit quantizer is not defined")]
    ZeroBits,

    #[error("link distance {distance:.3} m is below the {floor:.3} m floor")]
    DistanceBelowFloor { distance: f64, floor: f64 },

    #[error("user placement did not converge after {attempts} attempts for cell {cell}")]
    PlacementExhausted { cell: usize, attempts: u64 },

    #[error("negative input `{0}`")]
    NegativeInput(&'static str),

    #[error("user index {user} out of range ({users} users per cell)")]
    UserOutOfRange { user: usize, users: usize },

    #[error("matched filter undefined for zero own-cell SNR")]
    ZeroOwnSnr,

    #[error("pilot overhead β·N_p/N_c = {0} must be below 1")]
    OverheadTooLarge(f64),

    #[error("limit is unbounded (no pilot contamination and no self-interference)")]
    UnboundedLimit,

    #[error("{0}")]
    Usage(String),

    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}
