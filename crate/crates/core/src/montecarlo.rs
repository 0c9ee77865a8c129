//! Monte Carlo trial orchestration and detector scoring.
//!
//! Each experiment draws `n` frames per hypothesis, runs every requested
//! detector on the identical frame and keeps the raw statistics. Thresholds
//! are calibrated empirically afterwards: ROC curves sweep every observed
//! statistic, P_D at a fixed P_FA uses the null-class quantile.
//!
//! SNR is σ_h²/σ_v², the average pilot power `E[h²]/2 = σ_h²` over the noise
//! power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canf::{canf_detect, NotchParams, NotchSettings};
use crate::detectors::{
    bank_detect, bayes_log_threshold, energy_detect, matched_detect, periodogram_detect, BankConfig, DetectorKind,
    DetectorOutput, OpCount,
};
use crate::error::{Error, Result, Violation};
use crate::signal_model::{
    simulate_frame_forced, Frame, Hypothesis, LatentOverrides, Latents, ModelParams, RngSeed, RngStream, UniformPrior,
};

pub const MIN_TRIALS: usize = 100;
pub const DEFAULT_PERIODOGRAM_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelParams,
    pub notch: NotchSettings,
    pub bank: BankConfig,
    pub detectors: Vec<DetectorKind>,
    pub snr_db_list: Vec<f64>,
    pub n_trials_per_hypothesis: usize,
    /// Realised frequency for every H1 frame; `None` draws from the prior.
    pub fixed_omega: Option<f64>,
    pub periodogram_grid: usize,
    pub seed: RngSeed,
}

impl ExperimentSpec {
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.model.violations();
        if !v.is_empty() {
            // bank and ω checks depend on a sane model
            v.extend(self.notch.violations());
            return v;
        }
        v.extend(self.notch.violations());
        v.extend(self.bank.violations(&self.model));
        if self.n_trials_per_hypothesis < MIN_TRIALS {
            v.push(Violation::new(
                "n_trials_per_hypothesis",
                format!("must be at least {MIN_TRIALS}, got {}", self.n_trials_per_hypothesis),
            ));
        }
        if let Some(w) = self.fixed_omega {
            if !self.model.in_support(w) {
                let (lo, hi) = self.model.support();
                v.push(Violation::new(
                    "fixed_omega",
                    format!("{w} outside support [{lo}, {hi}]"),
                ));
            }
        }
        if self.periodogram_grid == 0 {
            v.push(Violation::new("periodogram_grid", "must be positive"));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            v.push(Violation::new("snr_db_list", "entries must be finite"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.detectors {
            if !seen.insert(*d) {
                v.push(Violation::new("detectors", format!("{d} listed twice")));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// Copy with σ_v² set for the requested SNR.
    pub fn at_snr(&self, snr_db: f64) -> Self {
        Self {
            model: snr_to_sigma(snr_db, &self.model),
            ..self.clone()
        }
    }

    /// Copy with a different frame length.
    pub fn with_frame_length(&self, m_samples: usize) -> Self {
        let mut s = self.clone();
        s.model.m_samples = m_samples;
        s
    }
}

/// Params with σ_v² = σ_h² · 10^(-snr_db/10).
pub fn snr_to_sigma(snr_db: f64, params: &ModelParams) -> ModelParams {
    ModelParams {
        sigma_v_sq: params.sigma_h_sq * 10f64.powf(-snr_db / 10.0),
        ..*params
    }
}

pub fn sigma_to_snr_db(params: &ModelParams) -> f64 {
    10.0 * (params.sigma_h_sq / params.sigma_v_sq).log10()
}

/// Everything needed to score one frame with any detector.
#[derive(Debug, Clone)]
pub struct DetectorBench {
    pub model: ModelParams,
    pub notch: NotchParams,
    pub bank: BankConfig,
    pub periodogram_grid: usize,
    /// Frequency for the oracle detector when the frame carries no pilot.
    pub oracle_fallback: f64,
    pub log_threshold: f64,
    /// Energy decisions compare against the null mean Mσ_v².
    pub energy_threshold: f64,
}

impl DetectorBench {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let model = spec.model;
        Ok(Self {
            model,
            notch: NotchParams::new(&model, &spec.notch)?,
            bank: spec.bank.clone(),
            periodogram_grid: spec.periodogram_grid,
            oracle_fallback: spec.fixed_omega.unwrap_or(model.omega_bar),
            log_threshold: bayes_log_threshold(&model).unwrap_or(f64::INFINITY),
            energy_threshold: model.m_samples as f64 * model.sigma_v_sq,
        })
    }

    pub fn evaluate(&self, kind: DetectorKind, frame: &Frame) -> Result<DetectorOutput> {
        let y = &frame.samples;
        let m = &self.model;
        let t = self.log_threshold;
        Ok(match kind {
            DetectorKind::Energy => energy_detect(y, self.energy_threshold),
            DetectorKind::MatchedNominal => matched_detect(y, m, m.omega_bar, t),
            DetectorKind::MatchedOracle => {
                let omega = frame.true_omega().unwrap_or(self.oracle_fallback);
                matched_detect(y, m, omega, t)
            }
            DetectorKind::Bank => bank_detect(y, m, &self.bank, t),
            DetectorKind::PeriodogramGlrt => periodogram_detect(y, m, self.periodogram_grid, t),
            DetectorKind::Canf => canf_detect(y, m, &self.notch, t)?,
        })
    }
}

/// One detector's result on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorRecord {
    pub statistic: f64,
    pub omega_hat: Option<f64>,
    pub op_count: OpCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub hypothesis: Hypothesis,
    pub latents: Option<Latents>,
    /// Same order as [`TrialLog::detectors`].
    pub records: Vec<DetectorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub detectors: Vec<DetectorKind>,
    pub m_samples: usize,
    pub snr_db: f64,
    pub rows: Vec<TrialRow>,
}

impl TrialLog {
    fn column(&self, kind: DetectorKind) -> Result<usize> {
        self.detectors
            .iter()
            .position(|d| *d == kind)
            .ok_or(Error::MissingDetector(kind))
    }

    /// `(H0 statistics, H1 statistics)` for one detector.
    pub fn statistics(&self, kind: DetectorKind) -> Result<(Vec<f64>, Vec<f64>)> {
        let col = self.column(kind)?;
        let mut h0 = Vec::new();
        let mut h1 = Vec::new();
        for row in &self.rows {
            let s = row.records[col].statistic;
            match row.hypothesis {
                Hypothesis::H0 => h0.push(s),
                Hypothesis::H1 => h1.push(s),
            }
        }
        Ok((h0, h1))
    }

    /// `(ω_true, ω̂)` over H1 rows for a detector that reports a frequency.
    pub fn frequency_estimates(&self, kind: DetectorKind) -> Result<Vec<(f64, f64)>> {
        let col = self.column(kind)?;
        Ok(self
            .rows
            .iter()
            .filter_map(|row| {
                let truth = row.latents?.omega;
                row.records[col].omega_hat.map(|w| (truth, w))
            })
            .collect())
    }
}

/// Draw `2n` labelled frames and score every requested detector on each.
pub fn run_trials(spec: &ExperimentSpec) -> Result<TrialLog> {
    let bench = DetectorBench::new(spec)?;
    let n = spec.n_trials_per_hypothesis;
    let overrides = LatentOverrides {
        omega: spec.fixed_omega,
        ..Default::default()
    };
    let rows = (0..2 * n)
        .into_par_iter()
        .map(|j| {
            let (hypothesis, trial) = if j < n {
                (Hypothesis::H0, j)
            } else {
                (Hypothesis::H1, j - n)
            };
            let stream = RngStream::new(spec.seed, 2 * trial as u64 + (hypothesis == Hypothesis::H1) as u64);
            let frame = simulate_frame_forced(&spec.model, hypothesis, overrides, &UniformPrior, &stream)
                .map_err(|e| wrap(j, e))?;
            let records = spec
                .detectors
                .iter()
                .map(|&kind| {
                    bench.evaluate(kind, &frame).map(|out| DetectorRecord {
                        statistic: out.statistic,
                        omega_hat: out.omega_hat,
                        op_count: out.op_count,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| wrap(j, e))?;
            Ok(TrialRow {
                trial,
                hypothesis,
                latents: frame.latents,
                records,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TrialLog {
        detectors: spec.detectors.clone(),
        m_samples: spec.model.m_samples,
        snr_db: sigma_to_snr_db(&spec.model),
        rows,
    })
}

fn wrap(index: usize, e: Error) -> Error {
    Error::Trial {
        index,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub detector: DetectorKind,
    pub snr_db: f64,
    /// Sorted by `p_fa`, from (0,0) to (1,1).
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].p_fa - w[0].p_fa) * (w[1].p_d + w[0].p_d) / 2.0)
            .sum()
    }
}

/// Sweep the threshold over every observed statistic value.
pub fn empirical_roc(log: &TrialLog, kind: DetectorKind) -> Result<RocCurve> {
    let (mut h0, mut h1) = log.statistics(kind)?;
    if h0.is_empty() {
        return Err(Error::EmptyClass(Hypothesis::H0));
    }
    if h1.is_empty() {
        return Err(Error::EmptyClass(Hypothesis::H1));
    }
    h0.sort_by(|a, b| b.total_cmp(a));
    h1.sort_by(|a, b| b.total_cmp(a));
    let (n0, n1) = (h0.len() as f64, h1.len() as f64);

    let mut thresholds: Vec<f64> = h0.iter().chain(&h1).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint { p_fa: 0.0, p_d: 0.0 });
    let (mut i0, mut i1) = (0usize, 0usize);
    for tau in thresholds {
        while i0 < h0.len() && h0[i0] >= tau {
            i0 += 1;
        }
        while i1 < h1.len() && h1[i1] >= tau {
            i1 += 1;
        }
        points.push(RocPoint {
            p_fa: i0 as f64 / n0,
            p_d: i1 as f64 / n1,
        });
    }
    Ok(RocCurve {
        detector: kind,
        snr_db: log.snr_db,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
    pub n_h0: usize,
    pub n_h1: usize,
}

impl OperatingPoint {
    /// Binomial standard error of `p_d`.
    pub fn p_d_std_err(&self) -> f64 {
        (self.p_d * (1.0 - self.p_d) / self.n_h1 as f64).sqrt()
    }
}

/// Smallest threshold whose empirical false-alarm rate does not exceed the
/// target, and the detection rate it achieves.
pub fn operating_point(log: &TrialLog, kind: DetectorKind, target_pfa: f64) -> Result<OperatingPoint> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::InvalidParams(vec![Violation::new(
            "target_pfa",
            format!("must lie in (0, 1), got {target_pfa}"),
        )]));
    }
    let (mut h0, h1) = log.statistics(kind)?;
    if h1.is_empty() {
        return Err(Error::EmptyClass(Hypothesis::H1));
    }
    let need = (10.0 / target_pfa).ceil() as usize;
    if h0.len() < need {
        return Err(Error::InsufficientNullSamples { have: h0.len(), need });
    }
    h0.sort_by(|a, b| b.total_cmp(a));
    let allowed = (target_pfa * h0.len() as f64).floor() as usize;

    // walk down distinct null values while the exceedance count stays allowed
    let mut threshold = next_up(h0[0]);
    let mut i = 0;
    while i < h0.len() {
        let v = h0[i];
        let mut j = i;
        while j < h0.len() && h0[j] == v {
            j += 1;
        }
        if j > allowed {
            break;
        }
        threshold = v;
        i = j;
    }
    let fa = h0.iter().filter(|s| **s >= threshold).count();
    let det = h1.iter().filter(|s| **s >= threshold).count();
    Ok(OperatingPoint {
        threshold,
        p_fa: fa as f64 / h0.len() as f64,
        p_d: det as f64 / h1.len() as f64,
        n_h0: h0.len(),
        n_h1: h1.len(),
    })
}

pub fn pd_at_pfa(log: &TrialLog, kind: DetectorKind, target_pfa: f64) -> Result<f64> {
    operating_point(log, kind, target_pfa).map(|op| op.p_d)
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

/// Per-frame CM/CA cost expected from the operation accounting.
pub fn reference_ops(kind: DetectorKind, m: usize, k_filters: usize, grid: usize) -> u64 {
    let m = m as u64;
    match kind {
        DetectorKind::Energy => m,
        DetectorKind::MatchedNominal | DetectorKind::MatchedOracle => 2 * m,
        DetectorKind::Bank => 2 * m * k_filters as u64,
        DetectorKind::PeriodogramGlrt => 2 * m * grid as u64,
        DetectorKind::Canf => 10 * m,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub detector: DetectorKind,
    pub m_samples: usize,
    pub frames: usize,
    pub total: OpCount,
    pub per_frame: OpCount,
    /// Every frame cost exactly the reference CM and CA count.
    pub matches_reference: bool,
}

pub fn complexity_report(log: &TrialLog, k_filters: usize, grid: usize) -> Vec<ComplexityRow> {
    log.detectors
        .iter()
        .enumerate()
        .map(|(col, &kind)| {
            let want = reference_ops(kind, log.m_samples, k_filters, grid);
            let mut total = OpCount::default();
            let mut exact = true;
            for row in &log.rows {
                let ops = row.records[col].op_count;
                exact &= ops.complex_mults == want && ops.complex_adds == want;
                total += ops;
            }
            let frames = log.rows.len();
            let per_frame = if frames == 0 {
                OpCount::default()
            } else {
                let f = frames as u64;
                OpCount {
                    complex_mults: total.complex_mults / f,
                    complex_adds: total.complex_adds / f,
                    aux_ops: total.aux_ops / f,
                }
            };
            ComplexityRow {
                detector: kind,
                m_samples: log.m_samples,
                frames,
                total,
                per_frame,
                matches_reference: exact && frames > 0,
            }
        })
        .collect()
}

/// Median of a non-empty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
