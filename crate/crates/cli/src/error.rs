use std::fmt::Display;
use std::path::Path;

/// Exit codes.
pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const VALIDATION: u8 = 3;
pub const DATA: u8 = 4;
pub const NUMERICAL: u8 = 5;
pub const IO: u8 = 6;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(VALIDATION, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(DATA, message)
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        Self::new(IO, format!("{}: {err}", path.display()))
    }
}

impl From<bnn_mcmc::Error> for CliError {
    fn from(e: bnn_mcmc::Error) -> Self {
        use bnn_mcmc::Error as E;
        let code = match &e {
            E::InvalidParameter(_) | E::Validation(_) => VALIDATION,
            E::Data(_) | E::Shape(_) => DATA,
            E::Numerical(_) => NUMERICAL,
            E::Io { .. } => IO,
            E::State(_) => FAILURE,
        };
        Self::new(code, e.to_string())
    }
}
