// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spikes_cli::config::{Format, Scenario};
use spikes_cli::runner::{run, RunOptions};
use spikes_cli::{acceptance, exit_code, figures, output};

#[derive(Parser)]
#[command(
    name = "spikes",
    version,
    about = "Simulate filtered estimates and monitored qubits, and test their spike statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory, overriding the scenario.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trajectory and event file format, overriding the scenario.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's simulations and write trajectories and events.
    Simulate,
    /// Simulate, run the scenario's tests and write a report.
    Analyze,
    /// Write the data of one figure.
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
    },
    /// Run acceptance criteria: a number from 1 to 12, or `all`.
    Acceptance { id: String },
}

fn load(cli: &Cli) -> Result<Scenario> {
    let path = cli.config.as_ref().context("--config is required")?;
    Ok(Scenario::load(path)?)
}

fn out_dir(cli: &Cli, sc: &Scenario) -> PathBuf {
    cli.out.clone().or_else(|| sc.output.directory.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Simulate | Command::Analyze => {
            let sc = load(cli)?;
            let analyze = matches!(cli.command, Command::Analyze);
            let out = run(&sc, &RunOptions { workers: cli.workers, seed: cli.seed, analyze })?;
            let formats = cli.format.map(|f| vec![f]).unwrap_or_else(|| sc.output.formats.clone());
            let dir = out_dir(cli, &sc);
            let files = output::write_outputs(&out, &dir, &formats)?;
            for t in &out.report.tests {
                let status = match t.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "INFO",
                };
                println!("{status}  {}: {}", t.test.name(), t.summary);
            }
            eprintln!("wrote {} files to {}", files.len(), dir.display());
            Ok(if analyze && sc.analysis.gate && !out.report.passed() { 1 } else { 0 })
        }
        Command::ReproduceFigure { figure } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let files = figures::reproduce_figure(*figure, &dir, cli.seed.unwrap_or(2), cli.workers)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(0)
        }
        Command::Acceptance { id } => {
            let ids = acceptance::parse_selection(id)?;
            let mut failed = 0;
            for id in ids {
                let o = acceptance::check(id, cli.workers)?;
                println!("{}", o.line());
                failed += (!o.pass) as u32;
            }
            Ok((failed > 0) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
