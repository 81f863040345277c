use std::fmt;

use multikernel::Error;

pub const EXIT_OK: i32 = 0;
/// A study finished but the error bound failed in some row.
pub const EXIT_BOUND_VIOLATED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_DESIGN: i32 = 4;
pub const EXIT_DOMAIN: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn with_code(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::NotConverged(_) => EXIT_CONVERGENCE,
            Error::SingularDesign(_) => EXIT_DESIGN,
            Error::PointOutsideDomain { .. } | Error::PointNotTabulated(_) => EXIT_DOMAIN,
            _ => EXIT_INPUT,
        };
        Self::with_code(code, err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::input(err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
