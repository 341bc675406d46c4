use alloc::string::String;

/// Errors raised by the analysis core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty matrix: {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelCount { labels: usize, rows: usize },
    #[error("unknown language tag {0:?}")]
    UnknownLanguage(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("duplicate vocabulary entry {0:?}")]
    DuplicateToken(String),
    #[error("bias length {bias} does not match vocabulary size {vocab}")]
    BiasLength { bias: usize, vocab: usize },
    #[error("class {0:?} has no samples")]
    EmptyClass(String),
    #[error("need at least {needed} classes, got {got}")]
    TooFewClasses { needed: usize, got: usize },
    #[error("language {0:?} has no rows")]
    EmptyLanguageGroup(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("source vector has zero norm")]
    ZeroNorm,
    #[error("layer mismatch: hidden state is {hidden}, projection was fitted on {projection}")]
    LayerMismatch {
        hidden: &'static str,
        projection: &'static str,
    },
    #[error("k={k} exceeds ranking length {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("no (original, candidate) pair was covered by the cross-lingual table")]
    ZeroCoverage,
    #[error("no lexicon entry for ({source_word:?}, {language:?}, {target:?})")]
    NoLexiconMatch {
        source_word: String,
        language: String,
        target: String,
    },
    #[error("duplicate ranking record for ({source_word:?}, {language:?}, {target:?})")]
    DuplicateRecord {
        source_word: String,
        language: String,
        target: String,
    },
    #[error("baseline has no record for ({source_word:?}, {language:?}, {target:?})")]
    MissingBaseline {
        source_word: String,
        language: String,
        target: String,
    },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("token {0:?} not found in vocabulary")]
    TokenNotFound(String),
}

pub type Result<T> = core::result::Result<T, Error>;
