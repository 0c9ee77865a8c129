use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use canf_sense_cli::config::{Layers, Source};
use canf_sense_cli::output::{read_csv, ComplexityCsvRow, FreqErrorRow, PdRow, RocRow, RunManifest};
use canf_sense_cli::presets::Preset;
use canf_sense_cli::run::{layered_config, RunOptions};
use canf_sense_cli::{EXIT_CONFIG, EXIT_RUNTIME, OUT_DIR_ENV};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_canf-sense"));
    cmd.env_remove(OUT_DIR_ENV);
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn manifest_outputs_exist(dir: &Path) -> RunManifest {
    let manifest = RunManifest::read(&dir.join(RunManifest::FILE_NAME)).unwrap();
    for f in &manifest.outputs {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    manifest
}

#[test]
fn list_presets_names_all_four() {
    let out = run(&["list-presets"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for p in Preset::ALL {
        assert!(text.contains(p.name()));
    }
}

#[test]
fn roc_preset_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("roc");
    let out = run(&[
        "run",
        "fig3_roc",
        "--trials",
        "100",
        "--quiet",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let manifest = manifest_outputs_exist(&out_dir);
    assert_eq!(
        manifest.outputs,
        vec!["roc_snr0db.csv", "roc_snr3db.csv", "roc_snr6db.csv"]
    );
    assert_eq!(manifest.seed, "20240917");
    assert!(manifest.snr_definition.contains("sigma_h^2 / sigma_v^2"));
    for f in &manifest.outputs {
        let text = fs::read_to_string(out_dir.join(f)).unwrap();
        assert!(text.starts_with("detector,p_fa,p_d\n"));
        assert!(!text.contains('\r'));
        let rows: Vec<RocRow> = read_csv(&out_dir.join(f)).unwrap();
        for name in [
            "energy",
            "matched_nominal",
            "matched_oracle",
            "bank",
            "periodogram_glrt",
            "canf",
        ] {
            let pts: Vec<&RocRow> = rows.iter().filter(|r| r.detector == name).collect();
            assert_eq!((pts[0].p_fa, pts[0].p_d), (0.0, 0.0));
            assert_eq!((pts.last().unwrap().p_fa, pts.last().unwrap().p_d), (1.0, 1.0));
            assert!(pts.windows(2).all(|w| w[1].p_fa >= w[0].p_fa));
        }
    }

    // the snapshot re-validates to the same experiment
    let mut layers = Layers::with_defaults();
    layers.apply_table(&manifest.config, Source::Config);
    let again = layers.resolve().unwrap();
    let opts = RunOptions {
        trials: Some(100),
        ..Default::default()
    };
    let (_, original) = layered_config(Preset::Fig3Roc, &opts).unwrap();
    assert_eq!(again.spec, original.spec);
    assert_eq!(again.frame_lengths, original.frame_lengths);
    assert_eq!(again.target_pfa, original.target_pfa);
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&[
            "run",
            "fig2_freq_error",
            "--trials",
            "100",
            "--quiet",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let bytes = |d: &Path| fs::read(d.join("freq_error.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));

    let rows: Vec<FreqErrorRow> = read_csv(&a.join("freq_error.csv")).unwrap();
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().all(|r| r.detector == "canf" && r.omega_true == 2.45));
    assert!(rows
        .iter()
        .all(|r| (r.abs_error - (r.omega_hat - r.omega_true).abs()).abs() < 1e-15));

    let c = dir.path().join("c");
    let out = run(&[
        "run",
        "fig2_freq_error",
        "--trials",
        "100",
        "--quiet",
        "--seed",
        "8",
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_ne!(bytes(&a), bytes(&c));
}

#[test]
fn pd_vs_m_has_every_frame_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fast.toml");
    fs::write(
        &cfg,
        "[experiment]\nsnr_db = [3.0]\ndetectors = [\"energy\", \"canf\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("pd");
    let out = run(&[
        "run",
        "fig4_pd_vs_m",
        "--trials",
        "100",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows: Vec<PdRow> = read_csv(&out_dir.join("pd_vs_m.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for n in [64, 128, 256] {
        assert_eq!(rows.iter().filter(|r| r.n_samples == n).count(), 2);
    }
    assert!(rows.iter().all(|r| r.p_fa <= 0.1 && (0.0..=1.0).contains(&r.p_d)));
    let manifest = manifest_outputs_exist(&out_dir);
    assert_eq!(manifest.config["experiment"]["detectors"].as_array().unwrap().len(), 2);
}

#[test]
fn complexity_table_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "complexity_table",
        "--quiet",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows: Vec<ComplexityCsvRow> = read_csv(&dir.path().join("complexity.csv")).unwrap();
    let get = |d: &str, m: usize| rows.iter().find(|r| r.detector == d && r.m_samples == m).unwrap();
    for m in [64, 128, 256] {
        let m64 = m as u64;
        assert_eq!(get("energy", m).complex_mults, m64);
        assert_eq!(get("matched_nominal", m).complex_adds, 2 * m64);
        assert_eq!(get("canf", m).complex_mults, 10 * m64);
        assert_eq!(get("bank", m).complex_mults, 40 * m64);
    }
}

#[test]
fn env_var_sets_output_dir_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");
    let out = bin()
        .args(["run", "complexity_table", "--quiet"])
        .env(OUT_DIR_ENV, &from_env)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(from_env.join("complexity.csv").is_file());

    let out = bin()
        .args([
            "run",
            "complexity_table",
            "--quiet",
            "--out",
            from_flag.to_str().unwrap(),
        ])
        .env(OUT_DIR_ENV, dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(from_flag.join("complexity.csv").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn validate_empty_file_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model.epsilon = 0.98  # default"));
    assert!(text.lines().all(|l| l.ends_with("# default")));
}

#[test]
fn config_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[model]\nepsilon = 1.3\nsigma_h_sq = -2.0\n[notch]\nmu_bta = 0.1\n",
    )
    .unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_CONFIG as i32);
    let err = stderr(&out);
    assert!(err.contains("notch.mu_bta: unknown key"), "{err}");

    fs::write(&cfg, "[model]\nepsilon = 1.3\nsigma_h_sq = -2.0\n").unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    let err = stderr(&out);
    assert!(
        err.contains("model.epsilon") && err.contains("model.sigma_h_sq"),
        "{err}"
    );

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        code(&run(&["validate", "--config", missing.to_str().unwrap()])),
        EXIT_CONFIG as i32
    );
    assert_eq!(code(&run(&["run", "fig5", "--quiet"])), EXIT_CONFIG as i32);
    let out_dir = dir.path().join("o");
    assert_eq!(
        code(&run(&[
            "run",
            "fig3_roc",
            "--trials",
            "10",
            "--quiet",
            "--out",
            out_dir.to_str().unwrap()
        ])),
        EXIT_CONFIG as i32
    );
    assert!(!out_dir.exists());
}

#[test]
fn unwritable_output_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let out = run(&[
        "run",
        "complexity_table",
        "--quiet",
        "--out",
        file.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_RUNTIME as i32, "{}", stderr(&out));
}
