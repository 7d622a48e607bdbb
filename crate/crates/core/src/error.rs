use thiserror::Error;

/// Failure modes shared by every module of the laboratory.
///
/// The variants mirror the way a caller reacts: fix the input
/// (`Structural`, `Validation`, `Parameter`, `Domain`), loosen a numerical
/// setting (`Numerical`, `Resolution`), or stop a process that has run off
/// the end of its definition (`EndOfFiltration`, `Precondition`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("resolution insufficient: {0}")]
    Resolution(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("end of filtration: {0}")]
    EndOfFiltration(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Structural(_) | Error::Validation(_) | Error::Parameter(_) | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
