use canf_sense::canf::{canf_detect, estimate_frequency, init_state, step, NotchParams, NotchSettings};
use canf_sense::detectors::matched_filter_statistic;
use canf_sense::ModelParams;
use proptest::prelude::*;

fn model() -> ModelParams {
    ModelParams::default()
}

fn notch_with(settings: NotchSettings) -> NotchParams {
    NotchParams::new(&model(), &settings).unwrap()
}

fn sinusoid(m: usize, omega: f64, theta: f64) -> Vec<f64> {
    (1..=m).map(|i| (i as f64 * omega + theta).sin()).collect()
}

fn mean_noiseless_error(m: usize, notch: &NotchParams) -> f64 {
    let draws = 100;
    (0..draws)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / draws as f64;
            let est = estimate_frequency(&sinusoid(m, 2.45, theta), &model(), notch).unwrap();
            (est.omega_hat - 2.45).abs()
        })
        .sum::<f64>()
        / draws as f64
}

#[test]
fn noiseless_error_shrinks_with_frame_length() {
    let notch = notch_with(NotchSettings::default());
    let errs: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&m| mean_noiseless_error(m, &notch))
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

#[test]
fn bias_does_not_grow_as_rho_max_approaches_one() {
    let biases: Vec<f64> = [0.8, 0.9, 0.99]
        .iter()
        .map(|&rho_max| {
            let notch = notch_with(NotchSettings {
                rho_max,
                ..NotchSettings::default()
            });
            mean_noiseless_error(64, &notch)
        })
        .collect();
    for w in biases.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{biases:?}");
    }
}

#[test]
fn smoothed_cost_decreases_on_stationary_pilot() {
    let notch = notch_with(NotchSettings::default());
    let m = 64;
    let y = sinusoid(m, 2.45, 0.3);
    let mut state = init_state(&model(), &notch);
    let mut cost = Vec::with_capacity(m);
    for &v in &y {
        let (next, s) = step(&state, v, &notch).unwrap();
        cost.push(s * s + 1.0 / next.rho);
        state = next;
    }
    let q = m / 4;
    let head: f64 = cost[..q].iter().sum::<f64>() / q as f64;
    let tail: f64 = cost[m - q..].iter().sum::<f64>() / q as f64;
    assert!(tail < head, "head {head}, tail {tail}");
}

#[test]
fn strong_pilot_statistic_close_to_oracle() {
    let p = ModelParams {
        sigma_v_sq: 1e-2,
        ..model()
    };
    let notch = NotchParams::new(&p, &NotchSettings::default()).unwrap();
    let y: Vec<f64> = sinusoid(64, 2.45, 1.1);
    let out = canf_detect(&y, &p, &notch, 0.0).unwrap();
    let r_hat = matched_filter_statistic(&y, out.omega_hat.unwrap());
    let r_true = matched_filter_statistic(&y, 2.45);
    assert!((r_hat - r_true).abs() < 0.05 * r_true, "r(ω̂) {r_hat} vs r(ω) {r_true}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clamps_hold_on_arbitrary_traces(
        trace in prop::collection::vec(-50.0f64..50.0, 3..400),
        mu_beta in 1e-4f64..0.2,
        mu_rho in 1e-5f64..0.05,
        rho_max in 0.2f64..0.999,
    ) {
        let settings = NotchSettings { mu_beta, mu_rho, rho_min: 0.1, rho_max };
        let notch = notch_with(settings);
        let mut state = init_state(&model(), &notch);
        for &y in &trace {
            match step(&state, y, &notch) {
                Ok((next, _)) => {
                    prop_assert!(next.beta >= notch.beta_lo && next.beta <= notch.beta_hi);
                    prop_assert!(next.rho >= notch.rho_min && next.rho <= notch.rho_max);
                    state = next;
                }
                Err(_) => break,
            }
        }
        let (lo, hi) = model().support();
        let w = state.omega();
        prop_assert!(w >= lo - 1e-9 && w <= hi + 1e-9);
    }

    #[test]
    fn estimate_lies_in_support(omega in 0.9835f64..2.9435, theta in 0.0f64..std::f64::consts::TAU, m in 3usize..300) {
        let notch = notch_with(NotchSettings::default());
        let est = estimate_frequency(&sinusoid(m, omega, theta), &model(), &notch).unwrap();
        let (lo, hi) = model().support();
        prop_assert!(est.omega_hat >= lo - 1e-9 && est.omega_hat <= hi + 1e-9);
        prop_assert_eq!(est.op_count.complex_mults, 8 * m as u64);
    }
}
