use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("branching factor undefined: beta={beta} must be < alpha-1={limit} and theta={theta} must be > 0")]
    UndefinedBranching { beta: f64, limit: f64, theta: f64 },

    #[error("numeric integration did not converge: {0}")]
    Quadrature(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient events: need at least {needed}, got {got}")]
    InsufficientEvents { needed: usize, got: usize },

    #[error("fit failed on every start: {}", diagnostics.join("; "))]
    FitFailure { diagnostics: Vec<String> },

    #[error("supercritical process (n*={n_star}): expected size is unbounded")]
    Supercritical { n_star: f64 },

    #[error("inner intensity sum underflowed at event {index}")]
    Underflow { index: usize },

    #[error("{0}")]
    Domain(String),

    #[error("empty input")]
    EmptyInput,

    #[error("event {index} carries no user metadata")]
    MissingMetadata { index: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model payload: {0}")]
    CorruptPayload(String),

    #[error("feature row has {got} entries, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error("insufficient training data: {usable} usable cascades, need {needed}")]
    InsufficientTraining { usable: usize, needed: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
