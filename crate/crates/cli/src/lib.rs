//! Command-line front end for `heisgs`: run configuration, the HGF field
//! format, reports and the subcommands.

pub mod commands;
pub mod config;
pub mod hgf;
pub mod output;

pub use config::{RunConfig, SolveMethod};
pub use hgf::{HgfFile, HgfHeader};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVARIANT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_IO: u8 = 66;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<heisgs::Error> for CliError {
    fn from(e: heisgs::Error) -> Self {
        use heisgs::Error as E;
        let code = match e {
            E::Io(_) | E::Format(_) => EXIT_IO,
            E::Config(_) | E::Json(_) => EXIT_USAGE,
            _ => EXIT_NOT_CONVERGED,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::from(heisgs::Error::from(e))
    }
}
