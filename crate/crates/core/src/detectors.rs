//! Decision statistics and likelihood ratios.
//!
//! Every likelihood ratio is produced as a natural-log value; the `lr_*`
//! wrappers exponentiate and report overflow. Thresholds from
//! [`bayes_threshold`] must be compared in the log domain
//! (see [`bayes_log_threshold`]).
//!
//! Operation counts follow the complex-multiply/complex-add accounting:
//! one `y(m)·y(m)` term of the energy sum is one multiply and one add, a
//! single matched filter costs two of each per sample. Work outside that
//! accounting (exponentials, the bank's mixture combination, the closed-form
//! LR evaluation) is tallied separately in [`OpCount::aux_ops`].

use std::f64::consts::PI;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::signal_model::{Hypothesis, ModelParams};
use crate::special::{ln_i0, log_sum_exp};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub complex_mults: u64,
    pub complex_adds: u64,
    /// Scalar work outside the CM/CA accounting.
    pub aux_ops: u64,
}

impl OpCount {
    /// `n` multiplies and `n` adds.
    pub const fn balanced(n: u64) -> Self {
        Self {
            complex_mults: n,
            complex_adds: n,
            aux_ops: 0,
        }
    }

    pub const fn aux(n: u64) -> Self {
        Self {
            complex_mults: 0,
            complex_adds: 0,
            aux_ops: n,
        }
    }
}

impl Add for OpCount {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            complex_mults: self.complex_mults + rhs.complex_mults,
            complex_adds: self.complex_adds + rhs.complex_adds,
            aux_ops: self.aux_ops + rhs.aux_ops,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Aux cost of turning r(ω) into a closed-form log-LR (square, scale, offset).
const LR_EVAL_AUX: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Energy,
    /// Unknown-gain LR at the nominal frequency ω̄ (the mismatched detector).
    MatchedNominal,
    /// Unknown-gain LR at the realised frequency (performance bound).
    MatchedOracle,
    /// Bank of matched filters approximating the ω-marginal LR.
    Bank,
    /// GLRT with the periodogram's maximum-likelihood frequency.
    PeriodogramGlrt,
    /// GLRT with the constrained adaptive notch filter's frequency.
    Canf,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Energy,
        DetectorKind::MatchedNominal,
        DetectorKind::MatchedOracle,
        DetectorKind::Bank,
        DetectorKind::PeriodogramGlrt,
        DetectorKind::Canf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Energy => "energy",
            DetectorKind::MatchedNominal => "matched_nominal",
            DetectorKind::MatchedOracle => "matched_oracle",
            DetectorKind::Bank => "bank",
            DetectorKind::PeriodogramGlrt => "periodogram_glrt",
            DetectorKind::Canf => "canf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOutput {
    pub statistic: f64,
    pub decision: Hypothesis,
    pub op_count: OpCount,
    /// Frequency the statistic was evaluated at, for single-frequency GLRTs.
    pub omega_hat: Option<f64>,
}

impl DetectorOutput {
    pub fn new(statistic: f64, threshold: f64, op_count: OpCount, omega_hat: Option<f64>) -> Self {
        Self {
            statistic,
            decision: decide(statistic, threshold),
            op_count,
            omega_hat,
        }
    }
}

/// H1 iff `statistic ≥ threshold`.
pub fn decide(statistic: f64, threshold: f64) -> Hypothesis {
    if statistic >= threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// γ = [P(H0)/P(H1)]·[(C10-C00)/(C01-C11)].
pub fn bayes_threshold(params: &ModelParams) -> Result<f64> {
    let p_h1 = 1.0 - params.p_h0;
    if p_h1 <= 0.0 {
        return Err(Error::DegenerateThreshold("P(H1) = 0"));
    }
    let c = &params.costs;
    let miss = c.c01 - c.c11;
    if miss == 0.0 {
        return Err(Error::DegenerateThreshold("C01 = C11"));
    }
    Ok(params.p_h0 / p_h1 * (c.c10 - c.c00) / miss)
}

/// `ln γ`, the threshold for the log-LR statistics.
pub fn bayes_log_threshold(params: &ModelParams) -> Result<f64> {
    bayes_threshold(params).map(f64::ln)
}

/// `ln p(y | H0)` for i.i.d. N(0, σ_v²) samples.
pub fn null_log_evidence(samples: &[f64], params: &ModelParams) -> f64 {
    let var = params.sigma_v_sq;
    let norm = -0.5 * (2.0 * PI * var).ln();
    samples.iter().map(|y| norm - y * y / (2.0 * var)).sum()
}

/// Σ y(m)².
pub fn energy_statistic(samples: &[f64]) -> f64 {
    samples.iter().map(|y| y * y).sum()
}

pub fn energy_ops(m: usize) -> OpCount {
    OpCount::balanced(m as u64)
}

/// In-phase and quadrature correlations `(y_c, y_s)` with m starting at 1.
pub fn matched_filter_components(samples: &[f64], omega: f64) -> (f64, f64) {
    samples.iter().enumerate().fold((0.0, 0.0), |(c, s), (i, &y)| {
        let (sin, cos) = ((i + 1) as f64 * omega).sin_cos();
        (y.mul_add(cos, c), y.mul_add(sin, s))
    })
}

/// r(ω) = sqrt(y_c² + y_s²).
pub fn matched_filter_statistic(samples: &[f64], omega: f64) -> f64 {
    let (c, s) = matched_filter_components(samples, omega);
    c.hypot(s)
}

pub fn matched_filter_ops(m: usize) -> OpCount {
    OpCount::balanced(2 * m as u64)
}

/// Known-gain, known-frequency log-LR: `-Mh²/2σ_v² + ln I0(2h·r(ω)/σ_v²)`.
pub fn log_lr_case1(samples: &[f64], params: &ModelParams, omega: f64, h: f64) -> f64 {
    let r = matched_filter_statistic(samples, omega);
    log_lr_case1_from_r(r, samples.len(), params.sigma_v_sq, h)
}

pub(crate) fn log_lr_case1_from_r(r: f64, m: usize, sigma_v_sq: f64, h: f64) -> f64 {
    -(m as f64) * h * h / (2.0 * sigma_v_sq) + ln_i0(2.0 * h * r / sigma_v_sq)
}

pub fn lr_case1(samples: &[f64], params: &ModelParams, omega: f64, h: f64) -> Result<f64> {
    exp_checked(log_lr_case1(samples, params, omega, h))
}

/// Constants of the Rayleigh-marginal LR: `ln Λ = offset + scale·r²`.
#[derive(Debug, Clone, Copy)]
struct UnknownGainLr {
    offset: f64,
    scale: f64,
}

impl UnknownGainLr {
    fn new(m: usize, params: &ModelParams) -> Self {
        let sv = params.sigma_v_sq;
        let sh = params.sigma_h_sq;
        let denom = sv + m as f64 * sh;
        Self {
            offset: (sv / denom).ln(),
            scale: 2.0 * sh / (sv * denom),
        }
    }

    fn eval(&self, r: f64) -> f64 {
        self.scale.mul_add(r * r, self.offset)
    }
}

/// Unknown-gain log-LR at `omega`:
/// `ln[σ_v²/(σ_v²+Mσ_h²)] + 2σ_h² r²(ω) / [σ_v²(σ_v²+Mσ_h²)]`.
pub fn log_lr_case2(samples: &[f64], params: &ModelParams, omega: f64) -> f64 {
    log_lr_case2_from_r(matched_filter_statistic(samples, omega), samples.len(), params)
}

/// Same as [`log_lr_case2`] for a precomputed r(ω).
pub fn log_lr_case2_from_r(r: f64, m: usize, params: &ModelParams) -> f64 {
    UnknownGainLr::new(m, params).eval(r)
}

pub fn lr_case2(samples: &[f64], params: &ModelParams, omega: f64) -> Result<f64> {
    exp_checked(log_lr_case2(samples, params, omega))
}

fn exp_checked(log_value: f64) -> Result<f64> {
    let v = log_value.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(log_value))
    }
}

/// Discretised frequency prior for the matched-filter bank:
/// `ω_k = (ω̄-ε) + kΔ` for `k = 1..=K`, `K = 2ε/Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub k_filters: usize,
    pub delta: f64,
    pub weights: Vec<f64>,
}

impl BankConfig {
    /// K filters with uniform weights 1/K.
    pub fn uniform(params: &ModelParams, k_filters: usize) -> Result<Self> {
        Self::from_density(params, k_filters, |_| 1.0)
    }

    /// Weights proportional to `density(ω_k)`, normalised to sum to one.
    pub fn from_density(params: &ModelParams, k_filters: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        if k_filters == 0 {
            return Err(Error::InvalidParams(vec![Violation::new(
                "k_filters",
                "must be positive",
            )]));
        }
        if params.epsilon <= 0.0 {
            return Err(Error::InvalidParams(vec![Violation::new(
                "epsilon",
                "a frequency bank needs a non-degenerate support",
            )]));
        }
        let delta = 2.0 * params.epsilon / k_filters as f64;
        let lo = params.omega_bar - params.epsilon;
        let raw: Vec<f64> = (1..=k_filters).map(|k| density(lo + k as f64 * delta)).collect();
        let total: f64 = raw.iter().sum();
        let cfg = Self {
            k_filters,
            delta,
            weights: raw.iter().map(|w| w / total).collect(),
        };
        cfg.validate(params)?;
        Ok(cfg)
    }

    pub fn violations(&self, params: &ModelParams) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.k_filters == 0 {
            v.push(Violation::new("bank.k_filters", "must be positive"));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            v.push(Violation::new("bank.delta", "must be positive"));
        }
        if self.weights.len() != self.k_filters {
            v.push(Violation::new(
                "bank.weights",
                format!("expected {} weights, got {}", self.k_filters, self.weights.len()),
            ));
        }
        if self.weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            v.push(Violation::new("bank.weights", "must be non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            v.push(Violation::new("bank.weights", format!("must sum to 1, sum is {total}")));
        }
        let (lo, hi) = params.support();
        let slack = 1e-9 * hi;
        if self.frequencies(params).any(|w| w < lo - slack || w > hi + slack) {
            v.push(Violation::new("bank.delta", "grid leaves the frequency support"));
        }
        v
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let v = self.violations(params);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub fn frequencies<'a>(&'a self, params: &ModelParams) -> impl Iterator<Item = f64> + 'a {
        let lo = params.omega_bar - params.epsilon;
        (1..=self.k_filters).map(move |k| lo + k as f64 * self.delta)
    }

    pub fn ops(&self, m: usize) -> OpCount {
        let k = self.k_filters as u64;
        let mut ops = OpCount::default();
        for _ in 0..k {
            ops += matched_filter_ops(m);
        }
        // per filter: LR exponent, weight log, exp in log-sum-exp, running add
        ops + OpCount::aux(k * (LR_EVAL_AUX + 3))
    }
}

/// Bank approximation of the ω-marginal log-LR:
/// `ln Σ_k p(ω_k)·Λ(y | ω_k)`, combined by log-sum-exp.
pub fn log_lr_case3_bank(samples: &[f64], params: &ModelParams, bank: &BankConfig) -> f64 {
    let lr = UnknownGainLr::new(samples.len(), params);
    let terms: Vec<f64> = bank
        .frequencies(params)
        .zip(&bank.weights)
        .map(|(omega, &w)| {
            if w > 0.0 {
                w.ln() + lr.eval(matched_filter_statistic(samples, omega))
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    log_sum_exp(&terms)
}

pub fn lr_case3_bank(samples: &[f64], params: &ModelParams, bank: &BankConfig) -> Result<f64> {
    exp_checked(log_lr_case3_bank(samples, params, bank))
}

/// Grid frequencies for the periodogram search: `grid_size` points spanning
/// `support` inclusive of both ends; a single point sits at the midpoint.
pub fn periodogram_grid(grid_size: usize, support: (f64, f64)) -> impl Iterator<Item = f64> {
    let (lo, hi) = support;
    let step = if grid_size > 1 {
        (hi - lo) / (grid_size - 1) as f64
    } else {
        0.0
    };
    let start = if grid_size > 1 { lo } else { 0.5 * (lo + hi) };
    (0..grid_size).map(move |i| start + i as f64 * step)
}

/// Periodogram peak search. Returns `(ω_ML, r(ω_ML))`; ties go to the lowest
/// frequency. On an all-zero frame every grid point ties, so the result is
/// the lowest grid frequency and carries no information.
pub fn periodogram_peak(samples: &[f64], grid_size: usize, support: (f64, f64)) -> (f64, f64) {
    assert!(grid_size > 0, "periodogram grid must be non-empty");
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for omega in periodogram_grid(grid_size, support) {
        let mag_sq = dft_magnitude_sq(samples, omega);
        if mag_sq > best.1 {
            best = (omega, mag_sq);
        }
    }
    (best.0, best.1.sqrt())
}

/// |Σ y(m) e^{-jωm}|², via a rotating phasor.
fn dft_magnitude_sq(samples: &[f64], omega: f64) -> f64 {
    let (sw, cw) = omega.sin_cos();
    let (mut re, mut im) = (cw, sw);
    let (mut c, mut s) = (0.0, 0.0);
    for (i, &y) in samples.iter().enumerate() {
        // resync every 64 samples to keep rounding drift negligible
        if i % 64 == 63 {
            let (si, ci) = ((i + 1) as f64 * omega).sin_cos();
            re = ci;
            im = si;
        }
        c = y.mul_add(re, c);
        s = y.mul_add(im, s);
        let next_re = re * cw - im * sw;
        im = re * sw + im * cw;
        re = next_re;
    }
    c * c + s * s
}

pub fn periodogram_ml_frequency(samples: &[f64], grid_size: usize, support: (f64, f64)) -> f64 {
    periodogram_peak(samples, grid_size, support).0
}

pub fn periodogram_ops(m: usize, grid_size: usize) -> OpCount {
    OpCount::balanced(2 * (m * grid_size) as u64) + OpCount::aux(grid_size as u64 + LR_EVAL_AUX)
}

/// GLRT at the periodogram frequency. Returns `(log-LR, ω_ML)`.
pub fn log_glrt_periodogram(samples: &[f64], params: &ModelParams, grid_size: usize) -> (f64, f64) {
    let (omega, _) = periodogram_peak(samples, grid_size, params.support());
    (log_lr_case2(samples, params, omega), omega)
}

pub fn glrt_periodogram(samples: &[f64], params: &ModelParams, grid_size: usize) -> Result<f64> {
    exp_checked(log_glrt_periodogram(samples, params, grid_size).0)
}

/// Energy detector output.
pub fn energy_detect(samples: &[f64], threshold: f64) -> DetectorOutput {
    DetectorOutput::new(energy_statistic(samples), threshold, energy_ops(samples.len()), None)
}

/// Single matched-filter unknown-gain LR at a fixed frequency.
pub fn matched_detect(samples: &[f64], params: &ModelParams, omega: f64, log_threshold: f64) -> DetectorOutput {
    DetectorOutput::new(
        log_lr_case2(samples, params, omega),
        log_threshold,
        matched_filter_ops(samples.len()) + OpCount::aux(LR_EVAL_AUX),
        Some(omega),
    )
}

pub fn bank_detect(samples: &[f64], params: &ModelParams, bank: &BankConfig, log_threshold: f64) -> DetectorOutput {
    DetectorOutput::new(
        log_lr_case3_bank(samples, params, bank),
        log_threshold,
        bank.ops(samples.len()),
        None,
    )
}

pub fn periodogram_detect(
    samples: &[f64],
    params: &ModelParams,
    grid_size: usize,
    log_threshold: f64,
) -> DetectorOutput {
    let (stat, omega) = log_glrt_periodogram(samples, params, grid_size);
    DetectorOutput::new(
        stat,
        log_threshold,
        periodogram_ops(samples.len(), grid_size),
        Some(omega),
    )
}
