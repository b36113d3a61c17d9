use thiserror::Error;

/// Errors raised by model construction, fitting and inference.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cut grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("stage index {stage} out of range for a {components}-component system")]
    StageOutOfRange { stage: usize, components: usize },
    #[error("time {t} lies below the first cut point {tau0} of stage {stage}")]
    BelowGrid { stage: usize, t: f64, tau0: f64 },
    #[error("probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("grid does not cover stage {stage}: data range [{min}, {max}], grid [{tau0}, {tau_n}]")]
    GridDoesNotCover {
        stage: usize,
        min: f64,
        max: f64,
        tau0: f64,
        tau_n: f64,
    },
    #[error("degenerate sufficient statistics: {0}")]
    Degenerate(String),
    #[error("no admissible root of the load-share quadratic: {0}")]
    NoAdmissibleRoot(String),
    #[error("non-finite objective: {0}")]
    NonFinite(String),
    #[error("singular information matrix (determinant {determinant:e})")]
    SingularInformation { determinant: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("{failed} of {attempted} refits failed (limit {limit_pct}%)")]
    ExcessiveRefitFailures {
        failed: usize,
        attempted: usize,
        limit_pct: f64,
    },
    #[error("truncation acceptance rate {rate:e} fell below {floor:e}")]
    AcceptanceStarvation { rate: f64, floor: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("no candidate cut points: {0}")]
    NoCandidates(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
