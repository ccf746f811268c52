use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error)]
pub enum HydroError {
    /// An array did not have the size the instance requires.
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A schedule whose volumes do not follow the water balance was passed
    /// where a consistent one is required.
    #[error("schedule is not consistent with the dynamics (max residual {max_residual:e})")]
    InconsistentSchedule { max_residual: f64 },

    /// A single-plant subproblem has no admissible trajectory.
    #[error("subproblem for plant {plant} has no feasible trajectory")]
    InfeasibleSubproblem { plant: usize },

    #[error("linear relaxation is infeasible (phase-one residual {residual:e})")]
    LpInfeasible { residual: f64 },

    /// The network simplex hit its pivot cap.
    #[error("LP solver stopped after {pivots} pivots without reaching optimality")]
    SolverLimit { pivots: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HydroError> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(HydroError::Dimension {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}
