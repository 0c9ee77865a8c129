//! Layered TOML configuration.
//!
//! Layers are applied in order: built-in defaults, preset, `--config` file,
//! command-line flags. Each layer is flattened to dotted keys so unknown keys
//! and type errors can all be reported in one pass.

use std::collections::BTreeMap;
use std::fmt;

use canf_sense::detectors::{BankConfig, DetectorKind};
use canf_sense::signal_model::Costs;
use canf_sense::{ExperimentSpec, ModelParams, NotchSettings, RngSeed, Violation};
use toml::{Table, Value};

use crate::CliError;

pub const DEFAULTS_TOML: &str = include_str!("../presets/defaults.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Preset,
    Config,
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::Preset => "preset",
            Source::Config => "config",
            Source::Flag => "flag",
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float,
    UInt,
    Seed,
    FloatList,
    UIntList,
    Detectors,
    FrequencyOrPrior,
}

const SCHEMA: &[(&str, Kind)] = &[
    ("model.m_samples", Kind::UInt),
    ("model.sigma_h_sq", Kind::Float),
    ("model.omega_bar", Kind::Float),
    ("model.epsilon", Kind::Float),
    ("model.p_h0", Kind::Float),
    ("model.costs.c00", Kind::Float),
    ("model.costs.c10", Kind::Float),
    ("model.costs.c01", Kind::Float),
    ("model.costs.c11", Kind::Float),
    ("notch.mu_beta", Kind::Float),
    ("notch.mu_rho", Kind::Float),
    ("notch.rho_min", Kind::Float),
    ("notch.rho_max", Kind::Float),
    ("bank.k_filters", Kind::UInt),
    ("experiment.detectors", Kind::Detectors),
    ("experiment.snr_db", Kind::FloatList),
    ("experiment.n_trials", Kind::UInt),
    ("experiment.fixed_omega", Kind::FrequencyOrPrior),
    ("experiment.periodogram_grid", Kind::UInt),
    ("experiment.seed", Kind::Seed),
    ("experiment.target_pfa", Kind::Float),
    ("experiment.frame_lengths", Kind::UIntList),
];

/// Flattened key/value pairs with the layer each value came from.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    values: BTreeMap<String, (Value, Source)>,
}

impl Layers {
    pub fn with_defaults() -> Self {
        let mut layers = Self::default();
        layers
            .apply_toml(DEFAULTS_TOML, "built-in defaults", Source::Default)
            .expect("built-in defaults parse");
        layers
    }

    pub fn apply_toml(&mut self, text: &str, origin: &str, source: Source) -> Result<(), CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        self.apply_table(&table, source);
        Ok(())
    }

    pub fn apply_table(&mut self, table: &Table, source: Source) {
        let mut flat = Vec::new();
        flatten("", table, &mut flat);
        for (k, v) in flat {
            self.values.insert(k, (v, source));
        }
    }

    pub fn set(&mut self, key: &str, value: Value, source: Source) {
        self.values.insert(key.to_string(), (value, source));
    }

    /// Nested table of the current values, suitable for writing back out.
    pub fn snapshot(&self) -> Table {
        let mut root = Table::new();
        for (key, (value, _)) in &self.values {
            let mut parts: Vec<&str> = key.split('.').collect();
            let leaf = parts.pop().unwrap();
            let mut t = &mut root;
            for p in parts {
                t = t
                    .entry(p.to_string())
                    .or_insert_with(|| Value::Table(Table::new()))
                    .as_table_mut()
                    .expect("schema keys never nest under a leaf");
            }
            t.insert(leaf.to_string(), value.clone());
        }
        root
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut violations = Vec::new();
        for key in self.values.keys() {
            if !SCHEMA.iter().any(|(k, _)| k == key) {
                violations.push(Violation::new(key.clone(), "unknown key"));
            }
        }
        let mut typed = BTreeMap::new();
        for (key, kind) in SCHEMA {
            let (value, _) = self
                .values
                .get(*key)
                .unwrap_or_else(|| panic!("built-in defaults lack {key}"));
            match convert(*kind, value) {
                Ok(t) => {
                    typed.insert(*key, t);
                }
                Err(msg) => violations.push(Violation::new(*key, msg)),
            }
        }
        if !violations.is_empty() {
            return Err(CliError::Config(violations));
        }

        let f = |k: &str| typed[k].float();
        let u = |k: &str| typed[k].uint();
        let model = ModelParams {
            m_samples: u("model.m_samples") as usize,
            // noise power is set per SNR; 0 dB until then
            sigma_v_sq: f("model.sigma_h_sq"),
            sigma_h_sq: f("model.sigma_h_sq"),
            omega_bar: f("model.omega_bar"),
            epsilon: f("model.epsilon"),
            p_h0: f("model.p_h0"),
            costs: Costs {
                c00: f("model.costs.c00"),
                c10: f("model.costs.c10"),
                c01: f("model.costs.c01"),
                c11: f("model.costs.c11"),
            },
        };
        let notch = NotchSettings {
            mu_beta: f("notch.mu_beta"),
            mu_rho: f("notch.mu_rho"),
            rho_min: f("notch.rho_min"),
            rho_max: f("notch.rho_max"),
        };
        let k_filters = u("bank.k_filters") as usize;
        let bank = BankConfig::uniform(&model, k_filters).unwrap_or(BankConfig {
            k_filters,
            delta: f64::NAN,
            weights: Vec::new(),
        });
        let spec = ExperimentSpec {
            model,
            notch,
            bank,
            detectors: typed["experiment.detectors"].detectors(),
            snr_db_list: typed["experiment.snr_db"].floats(),
            n_trials_per_hypothesis: u("experiment.n_trials") as usize,
            fixed_omega: typed["experiment.fixed_omega"].frequency(),
            periodogram_grid: u("experiment.periodogram_grid") as usize,
            seed: RngSeed(u("experiment.seed")),
        };
        let config = RunConfig {
            spec,
            target_pfa: f("experiment.target_pfa"),
            frame_lengths: typed["experiment.frame_lengths"]
                .uints()
                .into_iter()
                .map(|n| n as usize)
                .collect(),
            provenance: self.values.iter().map(|(k, (_, s))| (k.clone(), *s)).collect(),
        };
        let violations = config.violations();
        if violations.is_empty() {
            Ok(config)
        } else {
            Err(CliError::Config(violations))
        }
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

#[derive(Debug, Clone)]
enum Typed {
    Float(f64),
    UInt(u64),
    Floats(Vec<f64>),
    UInts(Vec<u64>),
    Detectors(Vec<DetectorKind>),
    Frequency(Option<f64>),
}

impl Typed {
    fn float(&self) -> f64 {
        match self {
            Typed::Float(x) => *x,
            _ => unreachable!(),
        }
    }
    fn uint(&self) -> u64 {
        match self {
            Typed::UInt(x) => *x,
            _ => unreachable!(),
        }
    }
    fn floats(&self) -> Vec<f64> {
        match self {
            Typed::Floats(x) => x.clone(),
            _ => unreachable!(),
        }
    }
    fn uints(&self) -> Vec<u64> {
        match self {
            Typed::UInts(x) => x.clone(),
            _ => unreachable!(),
        }
    }
    fn detectors(&self) -> Vec<DetectorKind> {
        match self {
            Typed::Detectors(x) => x.clone(),
            _ => unreachable!(),
        }
    }
    fn frequency(&self) -> Option<f64> {
        match self {
            Typed::Frequency(x) => *x,
            _ => unreachable!(),
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_uint(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => None,
    }
}

fn convert(kind: Kind, v: &Value) -> Result<Typed, String> {
    let list = |v: &Value| {
        v.as_array()
            .cloned()
            .ok_or_else(|| format!("expected an array, got {}", v.type_str()))
    };
    match kind {
        Kind::Float => as_float(v)
            .map(Typed::Float)
            .ok_or_else(|| format!("expected a number, got {v}")),
        Kind::UInt => as_uint(v)
            .map(Typed::UInt)
            .ok_or_else(|| format!("expected a non-negative integer, got {v}")),
        Kind::Seed => match v {
            Value::String(s) => s
                .parse::<u64>()
                .map(Typed::UInt)
                .map_err(|_| format!("expected an unsigned 64-bit integer, got {v}")),
            _ => as_uint(v)
                .map(Typed::UInt)
                .ok_or_else(|| format!("expected an unsigned 64-bit integer, got {v}")),
        },
        Kind::FloatList => list(v)?
            .iter()
            .map(|x| as_float(x).ok_or_else(|| format!("expected numbers, got {x}")))
            .collect::<Result<_, _>>()
            .map(Typed::Floats),
        Kind::UIntList => list(v)?
            .iter()
            .map(|x| as_uint(x).ok_or_else(|| format!("expected non-negative integers, got {x}")))
            .collect::<Result<_, _>>()
            .map(Typed::UInts),
        Kind::Detectors => list(v)?
            .iter()
            .map(|x| {
                x.as_str().and_then(DetectorKind::from_name).ok_or_else(|| {
                    let names: Vec<_> = DetectorKind::ALL.iter().map(|d| d.name()).collect();
                    format!("unknown detector {x}; expected one of {}", names.join(", "))
                })
            })
            .collect::<Result<_, _>>()
            .map(Typed::Detectors),
        Kind::FrequencyOrPrior => match v {
            Value::String(s) if s == "prior" => Ok(Typed::Frequency(None)),
            _ => as_float(v)
                .map(|x| Typed::Frequency(Some(x)))
                .ok_or_else(|| format!("expected a frequency or \"prior\", got {v}")),
        },
    }
}

/// A validated experiment plus the CLI-level sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub target_pfa: f64,
    pub frame_lengths: Vec<usize>,
    pub provenance: BTreeMap<String, Source>,
}

impl RunConfig {
    fn violations(&self) -> Vec<Violation> {
        let mut v: Vec<Violation> = self
            .spec
            .violations()
            .into_iter()
            // delta and weights derive from k_filters and the model
            .filter(|x| x.field != "bank.delta" && x.field != "bank.weights")
            .map(|x| Violation::new(config_key(&x.field), x.message))
            .collect();
        if self.spec.snr_db_list.is_empty() {
            v.push(Violation::new("experiment.snr_db", "must list at least one SNR"));
        }
        if !(self.target_pfa > 0.0 && self.target_pfa < 1.0) {
            v.push(Violation::new(
                "experiment.target_pfa",
                format!("must lie in (0, 1), got {}", self.target_pfa),
            ));
        }
        if self.frame_lengths.is_empty() {
            v.push(Violation::new(
                "experiment.frame_lengths",
                "must list at least one length",
            ));
        }
        if let Some(n) = self.frame_lengths.iter().find(|n| **n < 3) {
            v.push(Violation::new(
                "experiment.frame_lengths",
                format!("lengths must be at least 3, got {n}"),
            ));
        }
        v.dedup();
        v
    }

    /// One line per key, `key = value  # source`.
    pub fn describe(&self, layers: &Layers) -> String {
        let mut out = String::new();
        for (key, _) in SCHEMA {
            let (value, source) = &layers.values[*key];
            out.push_str(&format!("{key} = {value}  # {source}\n"));
        }
        out
    }
}

/// Config key for a field name reported by the core library.
fn config_key(field: &str) -> String {
    if field.contains('.') {
        return field.to_string();
    }
    match field {
        "n_trials_per_hypothesis" => "experiment.n_trials".into(),
        "fixed_omega" | "periodogram_grid" | "detectors" => format!("experiment.{field}"),
        "snr_db_list" => "experiment.snr_db".into(),
        "sigma_v_sq" | "sigma_h_sq" => "model.sigma_h_sq".into(),
        "costs" => "model.costs".into(),
        other => format!("model.{other}"),
    }
}
