use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a file a parse error happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Byte(b) => write!(f, "byte offset {b}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("alignment error: {what} has {found} rows, expected {expected}")]
    Alignment {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("label {value} at index {index} is out of range for {n_classes} classes")]
    LabelOutOfRange {
        index: usize,
        value: i32,
        n_classes: usize,
    },

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("no prototype for class {class} in {set} set")]
    MissingPrototype { class: i32, set: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("class `{class}` occurs in {found} scenes, {needed} required")]
    InsufficientOccurrences {
        class: String,
        found: usize,
        needed: usize,
    },

    #[error(
        "only {retained} classes pass the frequency threshold, {needed} base classes requested"
    )]
    TooFewRetained { retained: usize, needed: usize },

    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: Location,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing input file {0}")]
    MissingInput(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Alignment { .. } => "alignment",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::EmptyMask(_) => "empty_mask",
            Error::MissingPrototype { .. } => "missing_prototype",
            Error::Contract(_) => "contract",
            Error::InsufficientOccurrences { .. } => "insufficient_occurrences",
            Error::TooFewRetained { .. } => "too_few_retained",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
            Error::MissingInput(_) => "missing_input",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    /// True for failures of the environment (reading or writing files)
    /// as opposed to bad inputs or configuration.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub fn path(&self) -> Option<&std::path::Path> {
        match self {
            Error::Parse { path, .. }
            | Error::Format { path, .. }
            | Error::Io { path, .. }
            | Error::Json { path, .. }
            | Error::MissingInput(path) => Some(path),
            _ => None,
        }
    }
}
