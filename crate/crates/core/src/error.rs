use std::fmt;

use thiserror::Error;

use crate::signal_model::Hypothesis;

/// A single failed parameter check, tagged with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("frequency {omega} outside prior support [{lo}, {hi}]")]
    OutOfSupport { omega: f64, lo: f64, hi: f64 },

    #[error("Bayes threshold undefined: {0}")]
    DegenerateThreshold(&'static str),

    #[error("likelihood ratio overflows f64 (log value {0})")]
    Overflow(f64),

    #[error("notch filter diverged at sample {index}")]
    Diverged { index: usize },

    #[error("frame has {len} samples, at least {min} required")]
    FrameTooShort { len: usize, min: usize },

    #[error("no {0:?} trials in log")]
    EmptyClass(Hypothesis),

    #[error("{have} null trials cannot calibrate P_FA; need at least {need}")]
    InsufficientNullSamples { have: usize, need: usize },

    #[error("detector {0:?} not present in trial log")]
    MissingDetector(crate::detectors::DetectorKind),

    #[error("trial {index}: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
