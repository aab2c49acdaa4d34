use thiserror::Error;

/// Errors raised by the data, learning, similarity, engine and backtest layers.
#[derive(Debug, Error)]
pub enum ClaError {
    #[error("invalid regime schedule: {0}")]
    ScheduleInvalid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("width mismatch: expected {expected} columns, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("strategy `{strategy}` cannot score a `{found}` context representation")]
    WrongRepresentation { strategy: String, found: String },

    #[error("sequence is empty")]
    EmptySequence,

    #[error("outcome supplied for time `{0}` which was never forecast")]
    NeverForecast(String),

    #[error("no base learner has been trained and the memory store is empty")]
    UntrainedBase,

    #[error("need at least {needed} entities, found {found}")]
    TooFewEntities { needed: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown {what} `{value}`")]
    UnknownName { what: &'static str, value: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ClaError> = std::result::Result<T, E>;
