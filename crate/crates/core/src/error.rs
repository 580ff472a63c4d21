use thiserror::Error;

/// Errors raised by the scaling-law toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("row error at line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("no records with arch_id `{0}`")]
    NoMatchingRecords(String),

    #[error("degenerate law: A, B and E are all zero")]
    DegenerateLaw,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("not enough records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("no start converged ({starts} starts tried): {diagnostics}")]
    NoConvergence { starts: usize, diagnostics: String },

    #[error("all {0} cross-validation candidates failed")]
    AllCandidatesFailed(usize),

    #[error("bootstrap unreliable: {failed} of {total} resample fits failed")]
    BootstrapUnreliable { failed: usize, total: usize },

    #[error("budget {budget:e} too small for model size {params}: D = {tokens:e} < 1")]
    BudgetTooSmall { budget: f64, params: u64, tokens: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("output `{0}` exists; pass --force to overwrite")]
    OutputExists(String),
}

impl Error {
    /// Short machine-readable identifier for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::Row { .. } => "row",
            Error::EmptyDataset => "empty_dataset",
            Error::NoMatchingRecords(_) => "no_matching_records",
            Error::DegenerateLaw => "degenerate_law",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Unidentifiable(_) => "unidentifiable",
            Error::TooFewRecords { .. } => "too_few_records",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AllCandidatesFailed(_) => "all_candidates_failed",
            Error::BootstrapUnreliable { .. } => "bootstrap_unreliable",
            Error::BudgetTooSmall { .. } => "budget_too_small",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::OutputExists(_) => "output_exists",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
