use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("no finite root: target {target} unattainable, achieved supremum {supremum}")]
    NoFiniteRoot { target: f64, supremum: f64 },

    #[error("degenerate importance weights in fold {fold}")]
    DegenerateWeights { fold: usize },

    #[error("cross-validation fold {fold} has zero predictive density")]
    ZeroFold { fold: usize },

    #[error("data error: {0}")]
    Data(String),
}
