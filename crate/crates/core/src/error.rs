use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too coarse: n_cells_per_side = {0}, need at least 4")]
    GridTooCoarse(usize),

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid boundary arc [{s0}, {s1}): {reason}")]
    InvalidArc { s0: f64, s1: f64, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("reaction coefficient negative at interior node {node} (value {value:e})")]
    NegativeReaction { node: usize, value: f64 },

    #[error("boundary data max-norm {norm:e} exceeds smallness radius {radius:e}")]
    SmallnessViolated { norm: f64, radius: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NewtonNotConverged { iterations: usize, residual: f64 },

    #[error("linearized operator ill-conditioned: dz V = {value:e} at node {node}, margin {margin:e}")]
    Conditioning { node: usize, value: f64, margin: f64 },

    #[error("boundary data not supported in the accessible arc (max off-arc value {0:e})")]
    SupportViolation(f64),

    #[error("missing cascade field for subset {0:#b}")]
    MissingDerivative(u32),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
