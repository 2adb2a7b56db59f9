//! Experiment runner for `gsverify-core`: configuration files, graph and
//! assignment formats, batch Monte Carlo runs, bound sweeps and a framed TCP
//! transport that runs the prover and verifier in separate processes.

pub mod config;
pub mod experiment;
pub mod formats;
pub mod selftest;
pub mod sweep;
pub mod transport;
pub mod wire;

use std::io;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Simulation(#[from] gsverify_core::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed message: {0}")]
    Wire(String),
    #[error("peer aborted the session: {0}")]
    Peer(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Core errors raised while interpreting configuration are configuration errors.
pub(crate) fn invalid(e: gsverify_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
