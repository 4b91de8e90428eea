//! Library side of the `netdefense` command-line tool: config model and
//! the subcommands, each a pure function of the config and seed.

pub mod commands;
pub mod config;

pub use config::{Context, Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Compute(m) => m,
        }
    }
}

impl From<netdefense::Error> for CliError {
    fn from(e: netdefense::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}
