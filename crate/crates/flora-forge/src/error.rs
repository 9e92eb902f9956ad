use thiserror::Error;

#[derive(Debug, Error)]
pub enum FloraError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate id {id} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("malformed vocab file {path}: {reason}")]
    MalformedVocab { path: String, reason: String },

    #[error("malformed template file: {0}")]
    MalformedTemplate(String),

    #[error("no templates registered for strategy {0}")]
    EmptyTemplateSet(crate::types::Strategy),

    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),

    #[error("unknown placeholder {{{0}}} in bindings")]
    UnknownBinding(String),

    #[error("unresolved placeholder {{{0}}} after rendering")]
    UnresolvedPlaceholder(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("record id {0} not found")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, FloraError>;

impl FloraError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        FloraError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
