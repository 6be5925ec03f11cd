use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate cell {cell}: signed volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solver failed: {message} (residual {residual:e})")]
    LinearSolver { message: String, residual: f64 },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e}); try a smaller time step")]
    Newton { iterations: usize, residual: f64 },

    #[error("non-finite value detected in {0}")]
    NonFinite(String),

    #[error("line search failed: no exponent up to {max_exponent} gave sufficient decrease (directional derivative {slope:e})")]
    LineSearch { max_exponent: u32, slope: f64 },

    #[error("ascent direction: directional derivative {0:e} is positive")]
    AscentDirection(f64),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: Box::new(self) }
    }

    /// Innermost error, with step/iteration annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } | Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}
