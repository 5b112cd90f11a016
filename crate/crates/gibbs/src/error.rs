use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes, so
/// variants are grouped by failure class rather than by module.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector violated its domain (bounds or ordering constraints).
    #[error("domain violation: {0}")]
    Domain(String),

    /// A forward model or loss produced a non-finite value.
    #[error("numerical failure: {msg} at theta = {theta:?}")]
    Numerical { msg: String, theta: Vec<f64> },

    /// The data carry no usable signal (e.g. zero variance at every grid point).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// All importance weights underflowed during a reweight step.
    #[error("importance weights degenerated moving to W = {w}; use a finer W step")]
    WeightDegeneracy { w: f64 },

    /// Invalid configuration, hyperparameters, or mismatched inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// Quadrature grid does not cover the prior support well enough.
    #[error("grid coverage error: truncated mass {mass:.3e} exceeds tolerance")]
    Coverage { mass: f64 },

    /// Checkpoint/dataset provenance mismatch.
    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
