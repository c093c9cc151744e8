use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmi_lab::cli_io::{run, to_json, validate, RunOptions};

/// Conditional mutual information experiments on Gibbs states under local channels.
///
/// Engine size caps can be raised with `CMI_LAB_CAP_<FIELD>` environment
/// variables (for example `CMI_LAB_CAP_DENSE_DIM=8192`).
#[derive(Parser)]
#[command(name = "cmi-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (or re-run a manifest).
    Run {
        config: PathBuf,
        /// `key=value` assignments applied to the config; dotted keys reach nested fields.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides, threads, output_dir } => {
            let opts = RunOptions { overrides, threads, output_dir };
            match run(&config, &opts) {
                Ok(outcome) => {
                    for p in outcome.outputs.iter().chain([&outcome.manifest]) {
                        println!("{}", p.display());
                    }
                    ExitCode::from(outcome.status.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Validate { config, overrides } => {
            let report = validate(&config, &overrides);
            match to_json(&report) {
                Ok(s) => print!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
            if report.is_valid() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
