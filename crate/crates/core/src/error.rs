use thiserror::Error;

/// Errors raised by the tensor-train kernels and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("dense size {requested} exceeds the cap of {cap} entries")]
    CapExceeded { requested: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stale environment: {0}")]
    StaleEnvironment(String),

    #[error("local solve failed at core {core}: {source}")]
    LocalSolve {
        core: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_core(self, core: usize) -> Error {
        match self {
            e @ Error::LocalSolve { .. } => e,
            e => Error::LocalSolve {
                core,
                source: Box::new(e),
            },
        }
    }
}
