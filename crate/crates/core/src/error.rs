use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input failed validation. The message names the offending field.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Skorokhod fixed-point iteration did not reach `tol` within `max_iter` passes.
    #[error("skorokhod iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    SkorokhodDiverged { iterations: usize, residual: f64 },

    /// The windowed Picard iteration on V failed even after shrinking the window.
    #[error("picard iteration diverged in window starting at t={window_start}: residual {residual:.3e} after {iterations} iterations")]
    PicardDiverged {
        window_start: f64,
        iterations: usize,
        residual: f64,
    },

    /// An analysis precondition was not met (too few samples, horizon too short, ...).
    #[error("analysis refused: {0}")]
    AnalysisRefused(String),

    /// Survival fit attempted on degenerate data (e.g. all hitting times equal).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Configuration document failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
