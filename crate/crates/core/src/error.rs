use thiserror::Error;

/// Errors produced while loading feeders, solving power flows, tracing
/// continuation curves and fitting chaos surrogates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("ill-conditioned element `{element}`: {reason}")]
    IllConditioned { element: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("power flow diverged after {iterations} iterations (mismatch {mismatch:.3e} p.u.)")]
    Divergence { iterations: usize, mismatch: f64 },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("voltage collapse at the base operating point")]
    CollapseAtBase,

    #[error("base case infeasible: {0}")]
    BaseInfeasible(String),

    #[error("load-generation direction is zero")]
    ZeroDirection,

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("collocation design error: {0}")]
    Design(String),

    #[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// True for failures of the numerical kernels (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::SingularJacobian
                | Error::CollapseAtBase
                | Error::Continuation(_)
                | Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
