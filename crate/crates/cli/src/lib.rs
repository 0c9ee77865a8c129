//! Experiment runner for the `canf-sense` library: layered TOML configs,
//! figure presets, CSV artifacts and a run manifest.

use std::path::PathBuf;

use canf_sense::Violation;

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CANF_SENSE_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", list(.0))]
    Config(Vec<Violation>),

    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Simulation(#[from] canf_sense::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::ReadConfig { .. } | CliError::Usage(_) => {
                EXIT_CONFIG
            }
            CliError::Simulation(_) | CliError::Io { .. } | CliError::Csv { .. } | CliError::Inconsistent(_) => {
                EXIT_RUNTIME
            }
        }
    }
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}
