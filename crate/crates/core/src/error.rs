use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FbError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{0}")]
    InvalidInput(String),

    /// Some samples left the admissible band `[delta, upper]`.
    #[error("phase-band violation{} at columns {columns:?}", time_suffix(*.t))]
    PhaseBand { t: Option<f64>, columns: Vec<usize> },

    #[error("resolution insufficient: interface within {clearance:.3e} of a fixed boundary (need 2*dy = {required:.3e})")]
    ResolutionInsufficient { clearance: f64, required: f64 },

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("policy iteration did not converge; residual history {history:?}")]
    PolicyIteration { history: Vec<f64> },

    #[error("probe out of phase at column {column}")]
    ProbeOutOfPhase { column: usize },

    #[error("velocity law evaluated outside its domain at column {column}: a = {a}, b = {b:?}")]
    LawDomain { column: usize, a: f64, b: Option<f64> },

    #[error("velocity law violates its declared monotonicity: {0}")]
    NonMonotoneLaw(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn time_suffix(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl From<std::io::Error> for FbError {
    fn from(e: std::io::Error) -> Self {
        FbError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FbError>;
