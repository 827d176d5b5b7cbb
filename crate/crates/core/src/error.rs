use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite atom position {0}")]
    NonFiniteAtom(f64),

    /// A consumer needed the measure to be exact above `needed`, but atoms
    /// below `floor` were discarded at construction.
    #[error("truncation: measure is only exact above {floor}, but {needed} was required")]
    Truncation { needed: f64, floor: f64 },

    #[error("invalid reproduction law: {0}")]
    InvalidLaw(String),

    #[error("cumulant has no positive root: {0}")]
    NoCriticalRoot(String),

    #[error("kappa(alpha) = {kappa:e} is not zero; alpha is not critical")]
    NotCritical { kappa: f64 },

    #[error("expected a {expected} law, found {found}")]
    WrongCase { expected: String, found: String },

    #[error("population of {size} particles at generation {generation} exceeds the cap of {cap}")]
    PopulationCap { size: usize, generation: usize, cap: usize },

    #[error("insufficient samples: needed {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("decoration is not normalized (max atom must be 0 on every draw)")]
    UnnormalizedDecoration,

    #[error("normalization constant is not finite and positive: {0}")]
    InfiniteNormalization(f64),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("value {value} outside the range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("function is not non-increasing with values in [0, 1]: {0}")]
    NonMonotone(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
