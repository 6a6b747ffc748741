// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtraj_core::app::{self, AppError, Overrides};

#[derive(Parser)]
#[command(
    name = "qtraj",
    version,
    about = "Quantum jump trajectories and fluctuation-theorem estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write per-trajectory ledgers.
    Simulate(Common),
    /// Estimate <W> at every point of the configured sweep.
    Sweep(Common),
    /// Check the ensemble against the master equation and run self-tests.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Master seed, overrides the config.
    #[arg(long, env = "QTRAJ_SEED")]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overrides the config.
    #[arg(long, env = "QTRAJ_OUT")]
    out: Option<PathBuf>,
    /// Also write every trajectory pair as JSON lines.
    #[arg(long)]
    dump_trajectories: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            dump_trajectories: self.dump_trajectories,
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = app::load_config(&a.config, &a.overrides())?;
            let report = app::run_simulate(&cfg, a.threads)?;
            finish_run(&report)
        }
        Command::Sweep(a) => {
            let cfg = app::load_config(&a.config, &a.overrides())?;
            let report = app::run_sweep(&cfg, a.threads)?;
            finish_run(&report)
        }
        Command::Validate(a) => {
            let cfg = app::load_config(&a.config, &a.overrides())?;
            let report = app::run_validate(&cfg, a.threads)?;
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if report.passed() {
                Ok(())
            } else {
                let n = report.checks.iter().filter(|c| !c.passed).count();
                Err(AppError::Validation(format!("{n} check(s) failed")))
            }
        }
    }
}

fn finish_run(report: &app::RunReport) -> Result<(), AppError> {
    for p in &report.points {
        let coord = p
            .coordinate
            .map(|(l, v)| format!("{l}={v} "))
            .unwrap_or_default();
        match &p.outcome {
            Ok(e) => println!(
                "{coord}<W> = {:.6} +/- {:.6} (n={}, discarded={}{})",
                e.mean,
                e.std_error,
                e.n_trajectories,
                e.n_discarded,
                if e.unreliable { ", unreliable" } else { "" }
            ),
            Err(msg) => println!("{coord}error: {msg}"),
        }
    }
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    match report.failed_points() {
        0 => Ok(()),
        n => Err(AppError::Runtime(qtraj_core::Error::InvariantViolation(
            format!("{n} sweep point(s) failed"),
        ))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtraj: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
