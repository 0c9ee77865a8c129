use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use canf_sense::detectors::DetectorKind;
use canf_sense::montecarlo::{complexity_report, empirical_roc, operating_point, run_trials};
use canf_sense::ExperimentSpec;
use toml::Value;

use crate::config::{Layers, RunConfig, Source};
use crate::output::{
    roc_file_name, write_csv, ComplexityCsvRow, FreqErrorRow, PdRow, RocRow, RunManifest, SNR_DEFINITION,
};
use crate::presets::Preset;
use crate::CliError;

/// Everything `run` needs besides the preset itself.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub quiet: bool,
}

/// Defaults, then preset, then the config file, then flags.
pub fn layered_config(preset: Preset, opts: &RunOptions) -> Result<(Layers, RunConfig), CliError> {
    let mut layers = Layers::with_defaults();
    layers.apply_toml(preset.toml(), &format!("preset {preset}"), Source::Preset)?;
    if let Some(path) = &opts.config_path {
        let text = read_config(path)?;
        layers.apply_toml(&text, &path.display().to_string(), Source::Config)?;
    }
    if let Some(seed) = opts.seed {
        let value = i64::try_from(seed)
            .map(Value::Integer)
            .unwrap_or_else(|_| Value::String(seed.to_string()));
        layers.set("experiment.seed", value, Source::Flag);
    }
    if let Some(n) = opts.trials {
        let n = i64::try_from(n).map_err(|_| CliError::Usage(format!("--trials {n} is too large")))?;
        layers.set("experiment.n_trials", Value::Integer(n), Source::Flag);
    }
    let config = layers.resolve()?;
    Ok((layers, config))
}

pub fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::ReadConfig {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Validate a config file layered over the defaults.
pub fn validate_file(path: &Path) -> Result<(Layers, RunConfig), CliError> {
    let mut layers = Layers::with_defaults();
    layers.apply_toml(&read_config(path)?, &path.display().to_string(), Source::Config)?;
    let config = layers.resolve()?;
    Ok((layers, config))
}

pub fn run_preset(preset: Preset, opts: &RunOptions) -> Result<RunManifest, CliError> {
    let (layers, config) = layered_config(preset, opts)?;
    check_preset_requirements(preset, &config)?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| CliError::Io {
        path: opts.out_dir.clone(),
        source: e,
    })?;

    let started = Instant::now();
    let progress = |msg: String| {
        if !opts.quiet {
            eprintln!("{msg}");
        }
    };
    let outputs = match preset {
        Preset::Fig2FreqError => freq_error(&config, &opts.out_dir, &progress)?,
        Preset::Fig3Roc => roc(&config, &opts.out_dir, &progress)?,
        Preset::Fig4PdVsM => pd_vs_m(&config, &opts.out_dir, &progress)?,
        Preset::ComplexityTable => complexity(&config, &opts.out_dir, &progress)?,
    };

    let manifest = RunManifest {
        preset: preset.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.spec.seed.0.to_string(),
        duration_secs: started.elapsed().as_secs_f64(),
        snr_definition: SNR_DEFINITION.to_string(),
        outputs,
        config: layers.snapshot(),
    };
    let path = manifest.write(&opts.out_dir)?;
    progress(format!("wrote {}", path.display()));
    Ok(manifest)
}

fn check_preset_requirements(preset: Preset, config: &RunConfig) -> Result<(), CliError> {
    let spec = &config.spec;
    let mut v = Vec::new();
    if spec.detectors.is_empty() {
        v.push(canf_sense::Violation::new(
            "experiment.detectors",
            format!("{preset} needs at least one detector"),
        ));
    }
    if preset == Preset::Fig2FreqError && !spec.detectors.iter().any(|d| reports_frequency(*d)) {
        v.push(canf_sense::Violation::new(
            "experiment.detectors",
            "fig2_freq_error needs canf or periodogram_glrt",
        ));
    }
    if preset == Preset::Fig4PdVsM {
        let need = (10.0 / config.target_pfa).ceil() as usize;
        if spec.n_trials_per_hypothesis < need {
            v.push(canf_sense::Violation::new(
                "experiment.n_trials",
                format!(
                    "at least {need} trials are needed to calibrate P_FA = {}",
                    config.target_pfa
                ),
            ));
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(v))
    }
}

fn reports_frequency(kind: DetectorKind) -> bool {
    matches!(kind, DetectorKind::Canf | DetectorKind::PeriodogramGlrt)
}

fn freq_error(config: &RunConfig, dir: &Path, progress: &dyn Fn(String)) -> Result<Vec<String>, CliError> {
    let detectors: Vec<DetectorKind> = config
        .spec
        .detectors
        .iter()
        .copied()
        .filter(|d| reports_frequency(*d))
        .collect();
    let base = ExperimentSpec {
        detectors: detectors.clone(),
        ..config.spec.clone()
    };
    let mut rows = Vec::new();
    for &snr in &config.spec.snr_db_list {
        progress(format!("freq_error: SNR {snr} dB"));
        let log = run_trials(&base.at_snr(snr))?;
        for &kind in &detectors {
            let col = log.detectors.iter().position(|d| *d == kind).unwrap();
            for row in &log.rows {
                let (Some(latents), Some(omega_hat)) = (row.latents, row.records[col].omega_hat) else {
                    continue;
                };
                let err = (omega_hat - latents.omega).abs();
                rows.push(FreqErrorRow {
                    detector: kind.name().to_string(),
                    snr_db: snr,
                    trial: row.trial,
                    omega_true: latents.omega,
                    omega_hat,
                    abs_error: err,
                    normalized_error: err / latents.omega,
                });
            }
        }
    }
    let name = "freq_error.csv";
    write_csv(&dir.join(name), &rows)?;
    Ok(vec![name.to_string()])
}

fn roc(config: &RunConfig, dir: &Path, progress: &dyn Fn(String)) -> Result<Vec<String>, CliError> {
    let mut outputs = Vec::new();
    for &snr in &config.spec.snr_db_list {
        progress(format!("roc: SNR {snr} dB"));
        let log = run_trials(&config.spec.at_snr(snr))?;
        let mut rows = Vec::new();
        for &kind in &config.spec.detectors {
            let curve = empirical_roc(&log, kind)?;
            rows.extend(curve.points.iter().map(|p| RocRow {
                detector: kind.name().to_string(),
                p_fa: p.p_fa,
                p_d: p.p_d,
            }));
        }
        let name = roc_file_name(snr);
        write_csv(&dir.join(&name), &rows)?;
        outputs.push(name);
    }
    Ok(outputs)
}

fn pd_vs_m(config: &RunConfig, dir: &Path, progress: &dyn Fn(String)) -> Result<Vec<String>, CliError> {
    let mut rows = Vec::new();
    for &snr in &config.spec.snr_db_list {
        for &n in &config.frame_lengths {
            progress(format!("pd_vs_m: SNR {snr} dB, N = {n}"));
            let log = run_trials(&config.spec.with_frame_length(n).at_snr(snr))?;
            for &kind in &config.spec.detectors {
                let op = operating_point(&log, kind, config.target_pfa)?;
                rows.push(PdRow {
                    detector: kind.name().to_string(),
                    snr_db: snr,
                    n_samples: n,
                    p_fa: op.p_fa,
                    p_d: op.p_d,
                });
            }
        }
    }
    let name = "pd_vs_m.csv";
    write_csv(&dir.join(name), &rows)?;
    Ok(vec![name.to_string()])
}

fn complexity(config: &RunConfig, dir: &Path, progress: &dyn Fn(String)) -> Result<Vec<String>, CliError> {
    let snr = config.spec.snr_db_list[0];
    let mut rows = Vec::new();
    for &n in &config.frame_lengths {
        progress(format!("complexity: N = {n}"));
        let log = run_trials(&config.spec.with_frame_length(n).at_snr(snr))?;
        for row in complexity_report(&log, config.spec.bank.k_filters, config.spec.periodogram_grid) {
            if !row.matches_reference {
                return Err(CliError::Inconsistent(format!(
                    "{} at M = {n} deviates from its reference operation count",
                    row.detector
                )));
            }
            rows.push(ComplexityCsvRow {
                detector: row.detector.name().to_string(),
                m_samples: n,
                complex_mults: row.per_frame.complex_mults,
                complex_adds: row.per_frame.complex_adds,
                aux_ops: row.per_frame.aux_ops,
            });
        }
    }
    let name = "complexity.csv";
    write_csv(&dir.join(name), &rows)?;
    Ok(vec![name.to_string()])
}
