//! `dyadnet` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dyadnet::graph::NetworkView;

use config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dyadnet", version, about = "Dyadic link-formation models on follow graphs")]
struct Cli {
    /// TOML run configuration; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_view)]
    view: Option<NetworkView>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of the graph and its vertices.
    Stats,
    /// Dyadic logit for the world and each configured country.
    Fit {
        /// Also write marginal effects at the mean.
        #[arg(long)]
        margins: bool,
    },
    /// Tetrad logit free of sender and receiver effects, compared with the plain fit.
    FitFe,
    /// Marginal effects at the mean.
    Margins {
        /// A fit written by `fit`; fits afresh when omitted.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Draw a synthetic graph from the [synth] section.
    Simulate,
    /// Country popularity ranking.
    Popularity,
}

fn parse_view(s: &str) -> Result<NetworkView, String> {
    s.parse().map_err(|e: dyadnet::Error| e.to_string())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<dyadnet::Error>() {
            return match err {
                dyadnet::Error::Config(_) => 2,
                e if e.is_numerical() => 4,
                _ => 3,
            };
        }
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ov = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
        view: cli.view,
    };
    let path = cli.config.ok_or_else(|| config::config_error("--config is required"))?;
    let cfg = RunConfig::load(&path, &ov)?;
    match cli.command {
        Command::Stats => commands::stats(&cfg),
        Command::Fit { margins } => commands::fit(&cfg, margins),
        Command::FitFe => commands::fit_fe(&cfg),
        Command::Margins { from } => commands::margins(&cfg, from.as_deref()),
        Command::Simulate => commands::simulate(&cfg),
        Command::Popularity => commands::popularity(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
