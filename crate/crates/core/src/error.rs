use crate::polarity::SentimentLabel;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),

    #[error("embedding `{id}`: {message}")]
    Embedding { id: String, message: String },

    #[error("no embedding for {} sentence(s): {}", .0.len(), .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class `{0}` has no examples")]
    EmptyClass(SentimentLabel),

    #[error(
        "covariance of component {component} is not positive-definite; \
         increase reg_covar (currently {reg_covar:e})"
    )]
    NotPositiveDefinite { component: usize, reg_covar: f64 },

    #[error("non-finite {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
