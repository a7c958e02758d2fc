use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate entry for query {query_id}, document {doc_id}")]
    DuplicateEntry {
        line: usize,
        query_id: String,
        doc_id: String,
    },

    #[error("line {line}: run tag {found:?} differs from {expected:?} seen earlier in the file")]
    MixedRunTags {
        line: usize,
        expected: String,
        found: String,
    },

    #[error("line {line}: conflicting grades {first} and {second} for query {query_id}, document {doc_id}")]
    ConflictingGrades {
        line: usize,
        query_id: String,
        doc_id: String,
        first: u32,
        second: u32,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} systems, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("system order mismatch at position {position}: expected {expected:?}, found {found:?}")]
    SystemOrderMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("normal equations are not positive definite even after ridge regularization")]
    Singular,

    #[error("training on fold {fold} failed: {source}")]
    Fold {
        fold: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
