use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate node set: {0}")]
    DegenerateNodes(String),

    #[error("Π not unisolvent on X (rank {rank} < 4)")]
    NotUnisolvent { rank: usize },

    #[error("system singular (duplicate nodes or non-unisolvent Π): {0}")]
    Singular(String),

    #[error("local preconditioner system singular at node {node}")]
    LocalSingular { node: usize },

    #[error("non-finite integrand value at node {node}")]
    NonFinite { node: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("quadrature did not converge: last two estimates {previous:e} and {last:e}")]
    NoConvergence { previous: f64, last: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (singular systems, non-convergence)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::LocalSingular { .. }
                | Error::NoConvergence { .. }
                | Error::NotUnisolvent { .. }
                | Error::DegenerateNodes(_)
        )
    }
}
