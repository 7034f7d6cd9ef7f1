use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),

    #[error("perturbation |x| = {x} must be below r = {r}")]
    PerturbationTooLarge { x: f64, r: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("depth {depth} exceeds the depth limit {limit}")]
    DepthLimit { depth: usize, limit: usize },

    #[error("bisection bracket [{lo}, {hi}] does not straddle zero (values {f_lo}, {f_hi})")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("box size {eps} is below the cloud resolution bound {resolution}")]
    Resolution { eps: f64, resolution: f64 },

    #[error("sandwich inequality violated at n = {n}, word {word}: residual {residual}")]
    SandwichViolation { n: usize, word: String, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Error {
        Error::Io(e.to_string())
    }
}
