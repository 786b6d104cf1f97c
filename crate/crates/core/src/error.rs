use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("momentum grid too small: Juttner tail at |P| = {p_max} is {ratio:e} of the peak")]
    GridTooSmall { p_max: f64, ratio: f64 },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("T_final = {t_final} is not a whole number of steps of size {dt}")]
    FractionalSteps { t_final: f64, dt: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),

    #[error("sign convention violated: I = {value:e} at X = {x}")]
    SignConvention { x: f64, value: f64 },

    #[error("no interior peak for Q = {0} (requires Q <= sqrt(3))")]
    NoInteriorPeak(f64),

    #[error("not enough time levels: need at least 3, got {0}")]
    TooFewLevels(usize),

    #[error("T must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the configuration rather than of the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidEpsilon(_)
                | Error::FractionalSteps { .. }
                | Error::DomainMismatch(_)
                | Error::InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
