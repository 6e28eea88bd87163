use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size cap exceeded: {0}")]
    Size(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("sign-indefinite model: {0}")]
    SignIndefinite(String),
    #[error("locked constraint: {0}")]
    Constraint(String),
    #[error("did not converge: {what} (residual {residual:e})")]
    NoConvergence { what: String, residual: f64 },
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("config error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("validation error in `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
