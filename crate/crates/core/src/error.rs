use thiserror::Error;

pub type Result<T> = std::result::Result<T, HqError>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HqError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A vector or matrix fell outside the admissible cone. `level` is the
    /// first `j` with `sigma_j <= 0`.
    #[error("not in the admissible cone: sigma_{level} = {value:e} <= 0{context}")]
    NotInCone {
        level: usize,
        value: f64,
        context: String,
    },

    #[error(
        "sampling exhausted: {accepted} accepted out of {proposals} proposals (rate {rate:e})"
    )]
    SamplingExhausted {
        accepted: u64,
        proposals: u64,
        rate: f64,
    },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e}): {reason}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("singular linear system at pivot {0}")]
    SingularSystem(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl HqError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HqError::InvalidInput(msg.into())
    }

    pub(crate) fn not_in_cone(level: usize, value: f64) -> Self {
        HqError::NotInCone {
            level,
            value,
            context: String::new(),
        }
    }

    pub(crate) fn with_context(self, ctx: impl AsRef<str>) -> Self {
        match self {
            HqError::NotInCone {
                level,
                value,
                context,
            } => HqError::NotInCone {
                level,
                value,
                context: format!("{context} ({})", ctx.as_ref()),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for HqError {
    fn from(e: std::io::Error) -> Self {
        HqError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HqError {
    fn from(e: serde_json::Error) -> Self {
        HqError::Config(e.to_string())
    }
}
