//! Primary-user observation model.
//!
//! Under H0 a frame is white Gaussian noise; under H1 it carries a pilot
//! `h·sin(mω + θ)` for `m = 1..=M` with Rayleigh gain `h`, uniform offset
//! frequency `ω ∈ [ω̄-ε, ω̄+ε]` and uniform phase `θ ∈ [0, 2π)`.
//!
//! Randomness flows through [`RngStream`], which hands out an independent
//! ChaCha substream per latent variable. Forcing one latent (the fixed-ω
//! experiments do this) leaves the draws of the other latents and of the
//! noise untouched.

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Bayes costs; `cXY` is the cost of deciding `HX` when `HY` is true.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Costs {
    pub c00: f64,
    pub c10: f64,
    pub c01: f64,
    pub c11: f64,
}

impl Default for Costs {
    fn default() -> Self {
        Self {
            c00: 0.0,
            c10: 1.0,
            c01: 1.0,
            c11: 0.0,
        }
    }
}

/// Prior, noise, cost and frequency-support parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Frame length M.
    pub m_samples: usize,
    /// AWGN variance σ_v².
    pub sigma_v_sq: f64,
    /// Rayleigh parameter σ_h²; `E[h²] = 2σ_h²`.
    pub sigma_h_sq: f64,
    /// Nominal angular frequency ω̄ (rad/sample).
    pub omega_bar: f64,
    /// Maximal frequency offset ε (rad/sample).
    pub epsilon: f64,
    /// Prior probability of H0.
    pub p_h0: f64,
    pub costs: Costs,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m_samples: 64,
            sigma_v_sq: 1.0,
            sigma_h_sq: 1.0,
            omega_bar: 1.9635,
            epsilon: 0.98,
            p_h0: 0.5,
            costs: Costs::default(),
        }
    }
}

impl ModelParams {
    /// Every broken invariant, not just the first.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.m_samples == 0 {
            v.push(Violation::new("m_samples", "must be positive"));
        }
        if !(self.sigma_v_sq > 0.0 && self.sigma_v_sq.is_finite()) {
            v.push(Violation::new(
                "sigma_v_sq",
                format!("must be positive, got {}", self.sigma_v_sq),
            ));
        }
        if !(self.sigma_h_sq > 0.0 && self.sigma_h_sq.is_finite()) {
            v.push(Violation::new(
                "sigma_h_sq",
                format!("must be positive, got {}", self.sigma_h_sq),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            v.push(Violation::new(
                "epsilon",
                format!("must be non-negative, got {}", self.epsilon),
            ));
        }
        if !(self.omega_bar > 0.0 && self.omega_bar < PI) {
            v.push(Violation::new(
                "omega_bar",
                format!("must lie in (0, π), got {}", self.omega_bar),
            ));
        } else if self.epsilon >= 0.0 {
            if self.omega_bar - self.epsilon <= 0.0 {
                v.push(Violation::new(
                    "epsilon",
                    format!("support lower edge ω̄-ε = {} must be > 0", self.omega_bar - self.epsilon),
                ));
            }
            if self.omega_bar + self.epsilon >= PI {
                v.push(Violation::new(
                    "epsilon",
                    format!("support upper edge ω̄+ε = {} must be < π", self.omega_bar + self.epsilon),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.p_h0) {
            v.push(Violation::new("p_h0", format!("must lie in [0, 1], got {}", self.p_h0)));
        }
        let c = &self.costs;
        if (c.c10 - c.c00).is_nan() || c.c10 - c.c00 <= 0.0 {
            v.push(Violation::new("costs", "c10 - c00 must be positive"));
        }
        if (c.c01 - c.c11).is_nan() || c.c01 - c.c11 <= 0.0 {
            v.push(Violation::new("costs", "c01 - c11 must be positive"));
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

    /// Frequency support `[ω̄-ε, ω̄+ε]`.
    pub fn support(&self) -> (f64, f64) {
        (self.omega_bar - self.epsilon, self.omega_bar + self.epsilon)
    }

    pub fn in_support(&self, omega: f64) -> bool {
        let (lo, hi) = self.support();
        (lo..=hi).contains(&omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

/// Which latent a substream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Gain = 0,
    Frequency = 1,
    Phase = 2,
    Noise = 3,
}

/// Random source for one frame: a seed plus a frame index.
///
/// Every `(seed, index, substream)` triple maps to its own ChaCha stream,
/// so frames can be generated in any order or in parallel and still come
/// out bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: RngSeed,
    index: u64,
}

impl RngStream {
    pub fn new(seed: RngSeed, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn substream(&self, which: Substream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.0);
        rng.set_stream(self.index.wrapping_mul(4).wrapping_add(which as u64));
        rng
    }
}

/// Frequency prior over the support. Only sampling is needed here; the
/// bank detector takes its own discretised weights.
pub trait FrequencyPrior: Sync {
    fn sample(&self, lo: f64, hi: f64, rng: &mut dyn RngCore) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl FrequencyPrior for UniformPrior {
    fn sample(&self, lo: f64, hi: f64, rng: &mut dyn RngCore) -> f64 {
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    }
}

/// Realised H1 latents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latents {
    pub h: f64,
    pub omega: f64,
    pub theta: f64,
}

/// Latents to clamp instead of drawing; `None` means draw from the prior.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatentOverrides {
    pub h: Option<f64>,
    pub omega: Option<f64>,
    pub theta: Option<f64>,
}

/// One observation block y(1..M) with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub hypothesis: Hypothesis,
    /// `Some` exactly when `hypothesis == H1`.
    pub latents: Option<Latents>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn true_omega(&self) -> Option<f64> {
        self.latents.map(|l| l.omega)
    }
}

/// Rayleigh draw with density `(h/σ_h²) exp(-h²/2σ_h²)`, by inversion.
pub fn sample_channel_gain<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    // 1-U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    (-2.0 * params.sigma_h_sq * (1.0 - u).ln()).sqrt()
}

pub fn sample_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..TAU)
}

/// Frame with every latent drawn from its prior (uniform ω).
pub fn simulate_frame(params: &ModelParams, hypothesis: Hypothesis, stream: &RngStream) -> Frame {
    simulate_frame_with_prior(params, hypothesis, &UniformPrior, stream)
}

pub fn simulate_frame_with_prior(
    params: &ModelParams,
    hypothesis: Hypothesis,
    prior: &dyn FrequencyPrior,
    stream: &RngStream,
) -> Frame {
    simulate_frame_forced(params, hypothesis, LatentOverrides::default(), prior, stream)
        .expect("no overrides, nothing to reject")
}

/// Frame with all three latents clamped.
pub fn simulate_frame_with_latents(
    params: &ModelParams,
    hypothesis: Hypothesis,
    h: f64,
    omega: f64,
    theta: f64,
    stream: &RngStream,
) -> Result<Frame> {
    let overrides = LatentOverrides {
        h: Some(h),
        omega: Some(omega),
        theta: Some(theta),
    };
    simulate_frame_forced(params, hypothesis, overrides, &UniformPrior, stream)
}

/// General form: clamp any subset of latents, draw the rest.
pub fn simulate_frame_forced(
    params: &ModelParams,
    hypothesis: Hypothesis,
    overrides: LatentOverrides,
    prior: &dyn FrequencyPrior,
    stream: &RngStream,
) -> Result<Frame> {
    let mut rejected = Vec::new();
    if let Some(omega) = overrides.omega {
        if !params.in_support(omega) {
            let (lo, hi) = params.support();
            return Err(Error::OutOfSupport { omega, lo, hi });
        }
    }
    if let Some(h) = overrides.h {
        if !(h >= 0.0 && h.is_finite()) {
            rejected.push(Violation::new(
                "h",
                format!("must be a finite non-negative gain, got {h}"),
            ));
        }
    }
    if let Some(theta) = overrides.theta {
        if !(0.0..TAU).contains(&theta) {
            rejected.push(Violation::new("theta", format!("must lie in [0, 2π), got {theta}")));
        }
    }
    if !rejected.is_empty() {
        return Err(Error::InvalidParams(rejected));
    }

    let m = params.m_samples;
    let sigma_v = params.sigma_v_sq.sqrt();
    let mut noise = stream.substream(Substream::Noise);
    let mut samples: Vec<f64> = (0..m)
        .map(|_| sigma_v * noise.sample::<f64, _>(StandardNormal))
        .collect();

    let latents = match hypothesis {
        Hypothesis::H0 => None,
        Hypothesis::H1 => {
            let h = overrides
                .h
                .unwrap_or_else(|| sample_channel_gain(params, &mut stream.substream(Substream::Gain)));
            let omega = overrides.omega.unwrap_or_else(|| {
                let (lo, hi) = params.support();
                prior.sample(lo, hi, &mut stream.substream(Substream::Frequency))
            });
            let theta = overrides
                .theta
                .unwrap_or_else(|| sample_phase(&mut stream.substream(Substream::Phase)));
            for (i, y) in samples.iter_mut().enumerate() {
                let idx = (i + 1) as f64;
                *y += h * idx.mul_add(omega, theta).sin();
            }
            Some(Latents { h, omega, theta })
        }
    };

    Ok(Frame {
        samples,
        hypothesis,
        latents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_setup() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn default_params_are_valid() {
        assert!(paper_setup().validate().is_ok());
    }

    #[test]
    fn violations_are_collected() {
        let p = ModelParams {
            sigma_v_sq: -1.0,
            sigma_h_sq: 0.0,
            epsilon: 1.5,
            p_h0: 2.0,
            ..ModelParams::default()
        };
        let fields: Vec<_> = p.violations().into_iter().map(|v| v.field).collect();
        assert!(fields.contains(&"sigma_v_sq".to_string()));
        assert!(fields.contains(&"sigma_h_sq".to_string()));
        assert!(fields.contains(&"epsilon".to_string()));
        assert!(fields.contains(&"p_h0".to_string()));
    }

    #[test]
    fn rayleigh_second_moment() {
        let p = paper_setup();
        let mut rng = RngStream::new(RngSeed(7), 0).substream(Substream::Gain);
        let n = 1_000_000;
        let mean_sq: f64 = (0..n).map(|_| sample_channel_gain(&p, &mut rng).powi(2)).sum::<f64>() / n as f64;
        assert!((mean_sq - 2.0).abs() < 0.02, "E[h²] = {mean_sq}");
    }

    #[test]
    fn rayleigh_degenerate_scale() {
        let p = ModelParams {
            sigma_h_sq: 1e-300,
            ..paper_setup()
        };
        let mut rng = RngStream::new(RngSeed(1), 0).substream(Substream::Gain);
        for _ in 0..100 {
            assert!(sample_channel_gain(&p, &mut rng) < 1e-140);
        }
    }

    #[test]
    fn gain_is_deterministic_per_seed() {
        let p = paper_setup();
        let a = sample_channel_gain(&p, &mut RngStream::new(RngSeed(42), 3).substream(Substream::Gain));
        let b = sample_channel_gain(&p, &mut RngStream::new(RngSeed(42), 3).substream(Substream::Gain));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn noiseless_frame_is_pure_sinusoid() {
        let p = ModelParams {
            sigma_v_sq: 1e-300,
            ..paper_setup()
        };
        let f = simulate_frame_with_latents(
            &p,
            Hypothesis::H1,
            1.0,
            p.omega_bar,
            0.0,
            &RngStream::new(RngSeed(0), 0),
        )
        .unwrap();
        for (i, y) in f.samples.iter().enumerate() {
            assert_eq!(*y, ((i + 1) as f64 * p.omega_bar).sin());
        }
    }

    #[test]
    fn null_frame_energy() {
        let p = paper_setup();
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|i| {
                simulate_frame(&p, Hypothesis::H0, &RngStream::new(RngSeed(3), i))
                    .samples
                    .iter()
                    .map(|y| y * y)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 64.0).abs() < 0.64, "mean energy {mean}");
    }

    #[test]
    fn realised_frequency_stays_in_support() {
        let p = paper_setup();
        for i in 0..10_000 {
            let f = simulate_frame(&p, Hypothesis::H1, &RngStream::new(RngSeed(9), i));
            let w = f.true_omega().unwrap();
            assert!((0.9835..=2.9435).contains(&w), "ω = {w}");
        }
    }

    #[test]
    fn frequency_histogram_is_flat() {
        // χ² goodness of fit, 20 bins, 10⁵ draws; 99.9% critical value for 19 dof is 43.8.
        let p = paper_setup();
        let (lo, hi) = p.support();
        let bins = 20;
        let n = 100_000;
        let mut counts = vec![0usize; bins];
        for i in 0..n {
            let w = simulate_frame(&p, Hypothesis::H1, &RngStream::new(RngSeed(11), i))
                .true_omega()
                .unwrap();
            let b = (((w - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let expect = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        assert!(chi2 < 43.8, "χ² = {chi2}");
    }

    #[test]
    fn forced_frequency_validation() {
        let p = paper_setup();
        let s = RngStream::new(RngSeed(0), 0);
        assert!(simulate_frame_with_latents(&p, Hypothesis::H1, 1.0, 2.45, 0.5, &s).is_ok());
        assert!(matches!(
            simulate_frame_with_latents(&p, Hypothesis::H1, 1.0, 3.0, 0.5, &s),
            Err(Error::OutOfSupport { .. })
        ));
        assert!(simulate_frame_with_latents(&p, Hypothesis::H1, -1.0, 2.45, 0.5, &s).is_err());
    }

    #[test]
    fn zero_gain_matches_null_frame() {
        let p = paper_setup();
        let s = RngStream::new(RngSeed(5), 17);
        let h1 = simulate_frame_with_latents(&p, Hypothesis::H1, 0.0, 2.45, 1.0, &s).unwrap();
        let h0 = simulate_frame(&p, Hypothesis::H0, &s);
        assert_eq!(h1.samples, h0.samples);
    }

    #[test]
    fn forcing_one_latent_leaves_others() {
        let p = paper_setup();
        let s = RngStream::new(RngSeed(5), 2);
        let free = simulate_frame(&p, Hypothesis::H1, &s);
        let forced = simulate_frame_forced(
            &p,
            Hypothesis::H1,
            LatentOverrides {
                omega: Some(2.45),
                ..Default::default()
            },
            &UniformPrior,
            &s,
        )
        .unwrap();
        let (a, b) = (free.latents.unwrap(), forced.latents.unwrap());
        assert_eq!(a.h, b.h);
        assert_eq!(a.theta, b.theta);
        assert_eq!(b.omega, 2.45);
    }

    #[test]
    fn null_frame_has_no_latents() {
        let f = simulate_frame(&paper_setup(), Hypothesis::H0, &RngStream::new(RngSeed(0), 0));
        assert!(f.latents.is_none());
        assert_eq!(f.len(), 64);
    }
}
