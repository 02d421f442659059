use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Series at |z| = 1 with a non-positive convergence margin.
    #[error("hypergeometric series diverges at |z| = 1: convergence margin h = {margin} <= 0")]
    Divergent { margin: f64 },

    #[error(
        "series did not converge after {terms} terms (partial sum {partial_sum:e}, last term {last_term:e})"
    )]
    NonConvergence {
        terms: usize,
        partial_sum: f64,
        last_term: f64,
    },

    #[error("adaptive quadrature did not reach tolerance (estimate {estimate:e}, error bound {error_bound:e})")]
    Quadrature { estimate: f64, error_bound: f64 },

    #[error("moment does not exist: {0}")]
    InfiniteMoment(String),

    #[error("unsupported: {what}; supported alternatives: {alternatives}")]
    Unsupported { what: String, alternatives: String },

    #[error("family has no linear regression of X on Y: {0}")]
    NoLinearRegression(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("statistic undefined on replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::Quadrature { .. } => true,
            Error::Replication { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
