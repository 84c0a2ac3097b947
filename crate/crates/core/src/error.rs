use thiserror::Error;

use crate::corpus::BioViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown tag {tag:?}")]
    UnknownTag { line: usize, tag: String },

    #[error("invalid BIO sequence ({} violation(s)): {}", .0.len(), format_violations(.0))]
    InvalidBio(Vec<BioViolation>),

    #[error("no sentences")]
    NoSentences,

    #[error("invalid tag set: {0}")]
    TagSet(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("unsmoothed weights undefined for absent class {class:?}")]
    AbsentClass { class: String },

    #[error("imbalance ratio undefined: class #{index} has no samples")]
    GammaUndefined { index: usize },

    #[error("probability file line {line}: {message}")]
    ProbFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the experiment configuration rather than
    /// by the data it was run on.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

fn format_violations(violations: &[BioViolation]) -> String {
    let shown: Vec<String> = violations.iter().take(10).map(|v| v.to_string()).collect();
    let mut out = shown.join("; ");
    if violations.len() > shown.len() {
        out.push_str(&format!("; ... {} more", violations.len() - shown.len()));
    }
    out
}
