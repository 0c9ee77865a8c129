//! CSV schemas and the run manifest.
//!
//! Every CSV has one header row, `.` as decimal separator and LF line
//! endings. Column order is the field order of the row structs below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Table;

use crate::CliError;

/// `freq_error.csv`: one row per H1 trial per SNR per frequency-reporting detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqErrorRow {
    pub detector: String,
    pub snr_db: f64,
    pub trial: usize,
    pub omega_true: f64,
    pub omega_hat: f64,
    pub abs_error: f64,
    /// `|ω̂ - ω| / ω`.
    pub normalized_error: f64,
}

/// `roc_snr<X>db.csv`: empirical ROC points, sorted by `p_fa` within a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub detector: String,
    pub p_fa: f64,
    pub p_d: f64,
}

/// `pd_vs_m.csv`: detection rate at the calibrated threshold; `p_fa` is the
/// achieved false-alarm rate, never above the configured target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdRow {
    pub detector: String,
    pub snr_db: f64,
    pub n_samples: usize,
    pub p_fa: f64,
    pub p_d: f64,
}

/// `complexity.csv`: per-frame operation counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCsvRow {
    pub detector: String,
    pub m_samples: usize,
    pub complex_mults: u64,
    pub complex_adds: u64,
    pub aux_ops: u64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            source: e,
        })
}

/// File name for one SNR's ROC table, e.g. `roc_snr3db.csv`.
pub fn roc_file_name(snr_db: f64) -> String {
    format!("roc_snr{snr_db}db.csv")
}

pub const SNR_DEFINITION: &str =
    "SNR = sigma_h^2 / sigma_v^2: mean pilot power E[h^2]/2 over the Rayleigh prior, divided by the noise variance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub preset: String,
    pub version: String,
    /// Decimal string so the full u64 range survives TOML.
    pub seed: String,
    pub duration_secs: f64,
    pub snr_definition: String,
    /// Paths relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub config: Table,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.toml";

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(Self::FILE_NAME);
        let text = toml::to_string(self).expect("manifest serialises");
        fs::write(&path, text).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Parse {
            origin: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
