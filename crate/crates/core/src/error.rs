use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fields, grids and manifolds that do not belong together.
    #[error("shape error: {0}")]
    Shape(String),

    /// A parameter is outside its admissible range.
    #[error("range error: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("newton iteration failed at step {step}: residual {residual:.3e} after {iterations} iterations")]
    Newton {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
