//! `pertorb` command-line interface.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "pertorb", version, about = "Periodic solutions of periodically perturbed ODEs near a cycle")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `--set grids.t_points=16`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Built-in scenario name.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Scenario parameters as a JSON object.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Directory for reports and tables.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads for parallel sampling.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the cycle, its multipliers and degeneracy data.
    Cycle,
    /// Tabulate the Malkin, Melnikov and averaging functions.
    Biffun,
    /// Winding numbers and the boundary degree formula.
    Degree,
    /// Evaluate the hypotheses of each existence statement.
    Predict,
    /// Shoot for periodic solutions and compare with the predictions.
    Verify,
    /// Run every stage on a built-in scenario.
    Demo {
        /// Scenario to run; defaults to the configured one.
        name: Option<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = cli.common;
    let ov = Overrides {
        set: c.set,
        scenario: c.scenario,
        params: c.params,
        output_dir: c.output_dir,
        threads: c.threads,
        svg: c.svg,
    };
    let cfg = RunConfig::resolve(c.config.as_deref(), &ov)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let report = match cli.command {
        Command::Demo { name } => {
            let name = name.unwrap_or_else(|| cfg.scenario.name.clone());
            commands::cmd_demo(&cfg, &name)?
        }
        cmd => {
            let ctx = Ctx::new(cfg)?;
            match cmd {
                Command::Cycle => commands::cmd_cycle(&ctx)?,
                Command::Biffun => commands::cmd_biffun(&ctx)?,
                Command::Degree => commands::cmd_degree(&ctx)?,
                Command::Predict => commands::cmd_predict(&ctx)?,
                Command::Verify => commands::cmd_verify(&ctx)?,
                Command::Demo { .. } => unreachable!(),
            }
        }
    };
    println!("{}", serde_json::to_string_pretty(&report["result"])?);
    Ok(())
}

fn is_config_error(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<ConfigError>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<pertorb::Error>(),
        Some(pertorb::Error::UnknownScenario(_) | pertorb::Error::ParameterOutOfRange(_) | pertorb::Error::InvalidInput(_))
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
