use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative of order {order} unavailable (max {available})")]
    OrderUnavailable { order: usize, available: usize },

    #[error("point {x} outside the domain [{lo}, {hi}]")]
    DomainError { x: f64, lo: f64, hi: f64 },

    #[error("grid level {level} out of range: {reason}")]
    ResolutionError { level: u32, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function takes negative value {value} at x = {x}")]
    NegativityError { x: f64, value: f64 },

    #[error("out of range: {0}")]
    RangeError(String),

    #[error("singular point at x = {x}: f vanishes but a derivative of order {order} does not")]
    SingularPoint { x: f64, order: usize },

    #[error("wavelet order {0} not supported (1..=10)")]
    UnsupportedOrder(usize),

    #[error("embedded filter for order {order} failed validation: {reason}")]
    FilterValidation { order: usize, reason: String },

    #[error("degenerate fit: only {usable} usable levels (need 4)")]
    DegenerateFit { usable: usize },

    #[error("regularity {beta} not below wavelet order {order}")]
    RegularityMismatch { beta: f64, order: usize },

    #[error("flat norm is infinite")]
    InfiniteNorm,

    #[error("extension dips below zero: value {value} at x = {x}")]
    ExtensionNotNonnegative { x: f64, value: f64 },

    #[error("config error: {0}")]
    ConfigError(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
