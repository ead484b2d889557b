use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit status grouping used by the command-line front end and the C ABI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Budget,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Budget => 4,
            ErrorClass::Io => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pole on grid at (dq, dk) = ({dq}, {dk})")]
    PoleOnGrid { dq: f64, dk: f64 },

    #[error("degenerate roots s1 = s2 (exceptional point); amplitude is not of single-pole form")]
    DegenerateRoots,

    #[error("identically zero amplitude, nothing to normalize")]
    ZeroAmplitude,

    #[error("grid is degenerate: {0}")]
    DegenerateGrid(String),

    #[error("conditional slice at dk0 = {dk0} is empty (relative mass {relative_mass:.3e})")]
    EmptySlice { dk0: f64, relative_mass: f64 },

    #[error("conditioning point dk0 = {dk0} lies outside the photon range [{min}, {max}]")]
    ConditioningOutOfRange { dk0: f64, min: f64, max: f64 },

    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}; use a coarser grid")]
    BudgetExceeded {
        what: &'static str,
        needed: usize,
        budget: usize,
    },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::Config(_)
            | Error::ConditioningOutOfRange { .. }
            | Error::Unsupported(_) => ErrorClass::Config,
            Error::PoleOnGrid { .. }
            | Error::DegenerateRoots
            | Error::ZeroAmplitude
            | Error::DegenerateGrid(_)
            | Error::EmptySlice { .. }
            | Error::Eigensolver(_)
            | Error::Quadrature(_)
            | Error::Fit(_) => ErrorClass::Numerical,
            Error::BudgetExceeded { .. } => ErrorClass::Budget,
            Error::Io(_) | Error::Json(_) | Error::Format(_) => ErrorClass::Io,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Config(_) => "config",
            Error::PoleOnGrid { .. } => "pole_on_grid",
            Error::DegenerateRoots => "degenerate_roots",
            Error::ZeroAmplitude => "zero_amplitude",
            Error::DegenerateGrid(_) => "degenerate_grid",
            Error::EmptySlice { .. } => "empty_slice",
            Error::ConditioningOutOfRange { .. } => "conditioning_out_of_range",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Eigensolver(_) => "eigensolver",
            Error::Quadrature(_) => "quadrature",
            Error::Fit(_) => "fit",
            Error::Unsupported(_) => "unsupported",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "code": self.code(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}
