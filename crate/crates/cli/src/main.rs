use std::path::PathBuf;
use std::process::ExitCode;

use canf_sense_cli::presets::Preset;
use canf_sense_cli::run::{run_preset, validate_file, RunOptions};
use canf_sense_cli::{CliError, OUT_DIR_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "canf-sense", version, about = "Pilot-tone spectrum sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset experiment and write CSVs plus manifest.toml.
    Run {
        preset: String,
        /// TOML file overriding preset keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per hypothesis.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Check a config file and print the resolved settings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the available presets.
    ListPresets,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            preset,
            config,
            out,
            seed,
            trials,
            quiet,
        } => {
            let preset: Preset = preset.parse().map_err(CliError::Usage)?;
            let opts = RunOptions {
                config_path: config,
                out_dir: out,
                seed,
                trials,
                quiet,
            };
            let manifest = run_preset(preset, &opts)?;
            if !quiet {
                for f in &manifest.outputs {
                    println!("{}", opts.out_dir.join(f).display());
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let (layers, resolved) = validate_file(&config)?;
            print!("{}", resolved.describe(&layers));
            Ok(())
        }
        Command::ListPresets => {
            for p in Preset::ALL {
                println!("{:<18} {}", p.name(), p.summary());
            }
            Ok(())
        }
    }
}
