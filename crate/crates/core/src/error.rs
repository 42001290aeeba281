use thiserror::Error;

use crate::trace::SolverTrace;

pub type Result<T, E = ScpError> = std::result::Result<T, E>;

/// Residuals reached by an inner solve that ran out of iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl std::fmt::Display for BestResiduals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stat={:.3e} feas={:.3e} comp={:.3e}",
            self.stationarity, self.feasibility, self.complementarity
        )
    }
}

#[derive(Debug, Error)]
pub enum ScpError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("oracle `{oracle}` returned a non-finite value at the given point")]
    NonFinite { oracle: String },

    #[error("oracle `{oracle}` rejected its argument: {detail}")]
    OracleDomain { oracle: String, detail: String },

    #[error("subproblem did not converge within {iterations} iterations ({best})")]
    NonConvergence {
        iterations: usize,
        best: BestResiduals,
        /// JSON dump of the subproblem state for offline inspection.
        diagnostic: Option<String>,
    },

    #[error("subproblem appears infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("solve aborted after {} records: {source}", trace.records.len())]
    Aborted {
        #[source]
        source: Box<ScpError>,
        trace: Box<SolverTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ScpError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        ScpError::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ScpError::Config(msg.into())
    }

    /// The partial trace carried by an aborted solve, if any.
    pub fn partial_trace(&self) -> Option<&SolverTrace> {
        match self {
            ScpError::Aborted { trace, .. } => Some(trace),
            _ => None,
        }
    }
}
