mod cli;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::output::Output;

fn run(cli: &Cli) -> CliResult<Outcome> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let (mut cfg, path) = RunConfig::load(cli.config.as_deref())?;
    if let Some(p) = &path {
        log::info!("config {}", p.display());
    }
    cfg.resolve_seed(cli.seed);
    let needs_out = !matches!(cli.command, Command::Accept(_));
    let out = if needs_out || cli.out.is_some() || cfg.out_dir.is_some() {
        Some(Output::create(cli.out.as_deref(), &mut cfg)?)
    } else {
        None
    };
    log::debug!("running {}", cli.command.name());
    commands::dispatch(&cli.command, &mut cfg, out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Failure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("epsid {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
