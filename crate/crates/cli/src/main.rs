use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cla_cli::report::{cmd_report, summary_table};
use cla_cli::{cmd_generate, cmd_inspect_memory, cmd_run, ExperimentConfig, Overrides};
use cla_core::learners::LearnerKind;
use cla_core::similarity::Strategy;
use clap::{Args, Parser, Subcommand};

/// Continual learning augmentation experiments.
///
/// Flags override the matching keys of the JSON config. Log level comes
/// from `CLA_LOG` (e.g. `CLA_LOG=info`).
#[derive(Parser)]
#[command(name = "cla", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic panel and target CSVs.
    Generate(ConfigArgs),
    /// Run every learner x strategy cell and its baseline.
    Run(ConfigArgs),
    /// Summarise a run directory.
    Report {
        /// Run directory written by `run`.
        run_dir: PathBuf,
    },
    /// List the columns of a memory snapshot.
    InspectMemory { snapshot: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerKind>,
    /// Never remember: every cell reproduces its baseline.
    #[arg(long)]
    disable_gate: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: cla_core::ClaError| e.to_string())
}

fn parse_learner(s: &str) -> Result<LearnerKind, String> {
    s.parse().map_err(|e: cla_core::ClaError| e.to_string())
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        config.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            strategy: self.strategy,
            learner: self.learner,
            disable_gate: self.disable_gate,
        });
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            for p in cmd_generate(&args.load()?)? {
                println!("{}", p.display());
            }
        }
        Command::Run(args) => {
            let config = args.load()?;
            let dirs = cmd_run(&config).context("run failed")?;
            log::info!("wrote {} cells", dirs.len());
            println!("{}", config.output.display());
        }
        Command::Report { run_dir } => {
            let report = cmd_report(&run_dir)?;
            print!("{}", summary_table(&report));
        }
        Command::InspectMemory { snapshot } => print!("{}", cmd_inspect_memory(&snapshot)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CLA_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
