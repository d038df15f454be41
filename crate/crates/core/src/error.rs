use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("inadmissible kernel: {0}")]
    InadmissibleKernel(String),

    #[error("age grid mismatch: time step {dt} differs from age spacing {ds}")]
    GridMismatch { dt: f64, ds: f64 },

    #[error("instability at t = {t}: nodal magnitude {magnitude:e} exceeds 1e12, reduce dt")]
    Instability { t: f64, magnitude: f64 },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape { what, expected, got }
    }

    /// True for failures that originate in floating-point computation rather
    /// than in user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::Instability { .. } | Error::Resource(_)
        )
    }
}
