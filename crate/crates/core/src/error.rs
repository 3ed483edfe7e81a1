use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A base coordinate outside `C \ {0, 1}` (or too close to a puncture).
    #[error("domain error: {0}")]
    Domain(String),

    /// A continuation path that does not start at the base point, does not end at the target,
    /// or runs through a puncture.
    #[error("path error: {0}")]
    Path(String),

    /// A series, iteration or quadrature failed to converge.
    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: &'static str, detail: String },

    /// A multivalued section was evaluated across its branch cut.
    #[error("branch error: {0}")]
    Branch(String),

    /// The requested operation does not apply to this section (e.g. a divergent height).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Inputs are mutually inconsistent.
    #[error("inconsistent input: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn numeric(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
