//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! kind of failure so that the command-line layer can map them onto a stable
//! machine-readable error kind without inspecting message text.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure cases surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Invalid hyperparameters (zero counts, head width not dividing the
    /// model width, vocabulary too small for the tokenizer, ...).
    Config(String),
    /// Caller-supplied data is unusable: out-of-range tokens, empty inputs,
    /// mismatched widths between artifacts, out-of-range sparsity.
    Input(String),
    /// A file could not be parsed or serialized in the expected format.
    Format(String),
    /// Internal bookkeeping disagrees with itself; indicates a bug or a
    /// hand-edited artifact.
    Consistency(String),
    /// Importance normalization failed because a score vector has zero mean.
    Normalization(String),
    /// An operation would produce a model with no residual dimensions left.
    Degenerate(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl Error {
    /// Wraps an I/O failure with the path it happened on, so "file not
    /// found" names the file.
    #[must_use]
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }

    /// Stable lowercase tag for machine-readable error reports.
    #[must_use]
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Format(_) => "format",
            Error::Consistency(_) => "consistency",
            Error::Normalization(_) => "normalization",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Input(m) => write!(f, "input error: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Consistency(m) => write!(f, "consistency error: {m}"),
            Error::Normalization(m) => write!(f, "normalization error: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate model: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_are_stable_tags() {
        assert_eq!(Error::Config(String::new()).kind(), "config");
        assert_eq!(Error::Input(String::new()).kind(), "input");
        assert_eq!(Error::Format(String::new()).kind(), "format");
        assert_eq!(Error::Consistency(String::new()).kind(), "consistency");
        assert_eq!(Error::Normalization(String::new()).kind(), "normalization");
        assert_eq!(Error::Degenerate(String::new()).kind(), "degenerate");
    }

    #[test]
    fn display_includes_message() {
        let e = Error::Input("token 300 out of range".to_string());
        assert!(e.to_string().contains("token 300 out of range"));
    }

    #[test]
    fn io_at_names_the_path() {
        let inner = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let e = Error::io_at(std::path::Path::new("runs/model.bin"), inner);
        assert_eq!(e.kind(), "io");
        assert!(e.to_string().contains("runs/model.bin"));
    }
}
