use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {index} (x = {x})")]
    NonFinite { index: usize, x: f64, value: String },

    #[error("coefficient not finite: {name}({x}) = {value}")]
    CoefficientNotFinite {
        name: &'static str,
        x: f64,
        value: f64,
    },

    #[error("diffusion coefficient must be positive, got a({x}) = {value}")]
    NonPositiveDiffusion { x: f64, value: f64 },

    #[error("time step must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("composition count must be at least 1")]
    ZeroCompositions,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "lambda not in certified resolvent region: Re(lambda) = {re_lambda} <= omega = {omega}"
    )]
    LambdaNotAdmissible { re_lambda: f64, omega: f64 },

    #[error("grid too large for a dense resolvent: {n_points} nodes (limit {limit})")]
    GridTooLarge { n_points: usize, limit: usize },

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("singular tridiagonal system at row {0}")]
    SingularSystem(usize),

    #[error("problem failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unknown coefficient preset: {0}")]
    UnknownPreset(String),

    #[error("cannot read coefficient table {path}: {reason}")]
    Table { path: String, reason: String },

    #[error("cannot read config file {path}: {reason}")]
    ConfigFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
