use std::fmt;

use geoaffinity::ErrorClass;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<geoaffinity::Error> for CliError {
    fn from(e: geoaffinity::Error) -> Self {
        let code = match e.class() {
            ErrorClass::Data => EXIT_DATA,
            ErrorClass::Io => EXIT_IO,
            ErrorClass::Numerical => EXIT_NUMERICAL,
        };
        CliError { code, message: e.to_string() }
    }
}
