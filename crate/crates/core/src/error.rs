use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("test ratio {0} is outside (0, 1)")]
    InvalidTestRatio(f64),
    #[error("fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("document {doc}: span {start}..{end} is invalid")]
    InvalidSpan { doc: String, start: usize, end: usize },
    #[error("document {doc}: span {start}..{end} is not aligned to token boundaries")]
    SpanNotAligned { doc: String, start: usize, end: usize },
    #[error("document {doc}: spans overlap")]
    OverlappingSpans { doc: String },
    #[error("duplicate document id {0}")]
    DuplicateDocumentId(String),
    #[error("document {doc}: label {label} is not in the label set")]
    UnknownLabel { doc: String, label: String },
    #[error("labels already present in the base scheme: {0}")]
    LabelOverlap(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("document ids do not match: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Errors raised while decoding a binary model container.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },
    #[error("truncated data")]
    Truncated,
    #[error("{0}")]
    Invalid(String),
}
