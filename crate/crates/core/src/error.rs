use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid channel on site {site}: {reason}")]
    InvalidChannel { site: usize, reason: String },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("{what} = {value} exceeds cap {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },
    #[error("term {0} is not diagonal; the classical engine needs diagonal terms")]
    NonDiagonalTerm(usize),
    #[error("channel on site {0} has no classical transition matrix (it does not map diagonal states to diagonal states)")]
    NonClassicalChannel(usize),
    #[error("channel on site {0} is not diagonal in the Pauli basis; use the dense engine")]
    NotPauliDiagonal(usize),
    #[error("terms are not mutually commuting")]
    NonCommuting,
    #[error("transition matrix on site {site} has zero entry T[{out}][{input}]; mix the channel with a small amount of depolarization first")]
    ZeroTransitionEntry { site: usize, out: usize, input: usize },
    #[error("temperature too low for operator-log form: smallest eigenvalue {0:e}")]
    NotPositiveDefinite(f64),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
