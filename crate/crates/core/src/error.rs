use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a revision store file (bad magic header)")]
    BadMagic { path: String },
    #[error("corrupt record for revision {rev_id}: {message}")]
    Corrupt { rev_id: u64, message: String },
    #[error("corrupt index line {line}: {message}")]
    CorruptIndex { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String },
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("page {title:?} does not exist")]
    UnknownTitle { title: String },
    #[error("unexpected API response: {0}")]
    Decode(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RevertError {
    #[error("revisions not sorted by (timestamp, rev_id) at position {position}")]
    Unsorted { position: usize },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no positive examples")]
    NoPositives,
    #[error("no negative examples")]
    NoNegatives,
    #[error("page {page_id} is not a Featured Article")]
    NotFeatured { page_id: u64 },
    #[error(transparent)]
    Revert(#[from] RevertError),
    #[error("{file} line {line}: {message}")]
    Line {
        file: String,
        line: usize,
        message: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{stratum} stratum short by {shortfall}: {required} required, {available} available")]
    QuotaShortfall {
        stratum: String,
        required: usize,
        available: usize,
        shortfall: usize,
    },
    #[error("agreement needs at least 2 items with 2 or more annotations, found {found}")]
    TooFewPairableItems { found: usize },
    #[error("ROC-AUC needs both positive and negative labels")]
    SingleClass,
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("invalid annotation: {0}")]
    InvalidRecord(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data is empty")]
    Empty,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("bad model file: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
