use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },

    #[error("Fourier cutoff K={cutoff} too large for a grid of M={grid} points (need K <= M/2 - 1)")]
    CutoffTooLarge { cutoff: usize, grid: usize },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("density not resolvable on this grid: minimum reconstructed value {min:e}")]
    UnresolvedDensity { min: f64 },

    #[error("state space of {states} grid states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("empty ensemble: {0}")]
    EmptyEnsemble(&'static str),

    #[error("state kind does not match the model: {0}")]
    StateMismatch(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }
}
