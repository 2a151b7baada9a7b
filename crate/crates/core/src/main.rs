use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nemytskii::coefficients::{preset, PRESET_NAMES};
use nemytskii::scenario::{load_config, load_unvalidated, run_scenario_with, RunOptions};

#[derive(Parser)]
#[command(
    name = "nemytskii",
    version,
    about = "Porous-medium Fokker–Planck solver and particle experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSVs and summary.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads for independent experiments.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
    /// List coefficient presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            output_dir,
            jobs,
        } => match load_unvalidated(&config) {
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
            Ok(cfg) => match run_scenario_with(&cfg, &RunOptions { output_dir, jobs }) {
                Ok(summary) => {
                    print!("{}", summary.to_text());
                    summary.exit_code()
                }
                Err(e) => {
                    eprintln!("scenario {:?} failed: {e}", cfg.name);
                    e.exit_code()
                }
            },
        },
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("{}: ok ({} experiments)", cfg.name, cfg.experiments.len());
                0
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Command::Presets => {
            for name in PRESET_NAMES {
                let c = preset(name).expect("preset exists");
                println!(
                    "{name:<12} gamma0={} sup|E|={} sup b={}",
                    c.gamma0(),
                    c.drift.sup_bound(),
                    c.b.sup_bound()
                );
            }
            0
        }
    };
    ExitCode::from(code as u8)
}
