//! Crate-wide error type.

/// Errors raised by the geometry, clustering, control and simulation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("invalid coordinate")]
    InvalidCoordinate,

    #[error("invalid hull: {0}")]
    InvalidHull(String),

    #[error("invalid cluster count: k={k} for {len} points")]
    InvalidClusterCount { k: usize, len: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(usize),

    #[error("more selected evaders than herders: {selected} > {herders}")]
    MoreSelectedThanHerders { selected: usize, herders: usize },

    #[error("controllability loss")]
    ControllabilityLoss,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("time out of range: {0}")]
    TimeOutOfRange(f64),

    #[error("window outside log")]
    WindowOutsideLog,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("simulation aborted: {0}")]
    Aborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
