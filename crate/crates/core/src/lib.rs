//! Pilot-tone spectrum sensing with an adaptive notch filter front end.
//!
//! A secondary user decides whether a sinusoidal pilot of unknown gain,
//! phase and (approximately known) frequency is present in a short real
//! frame. The crate provides the generative model, a family of likelihood
//! ratio detectors, the constrained adaptive notch filter (CANF) frequency
//! tracker, and Monte Carlo tooling to compare them.

pub mod canf;
pub mod detectors;
pub mod error;
pub mod montecarlo;
pub mod signal_model;
pub mod special;

pub use canf::{canf_detect, estimate_frequency, FrequencyEstimate, NotchParams, NotchSettings, NotchState};
pub use detectors::{BankConfig, DetectorKind, DetectorOutput, OpCount};
pub use error::{Error, Result, Violation};
pub use montecarlo::{
    complexity_report, empirical_roc, operating_point, pd_at_pfa, run_trials, snr_to_sigma, ExperimentSpec, RocCurve,
    TrialLog,
};
pub use signal_model::{simulate_frame, Frame, Hypothesis, Latents, ModelParams, RngSeed, RngStream};
