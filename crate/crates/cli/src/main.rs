//! `heatlab` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab::lab::{exit_code, run_experiment, set_threads, Experiment, LabConfig, RunOptions};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Heat-flow embedding laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in invariant suite (a config is optional)
    Verify(Common),
    /// Derivative-identity and monotonicity scans of Q_p
    Qp(Common),
    /// Atom tables, horizontal graphs and the vertical forest
    Atoms(Common),
    /// Embedding partial sums, convex split and tree budgets
    Embed(Common),
    /// Write a generator field to disk
    Gen(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Verify(c) => (Experiment::Verify, c),
        Command::Qp(c) => (Experiment::Qp, c),
        Command::Atoms(c) => (Experiment::Atoms, c),
        Command::Embed(c) => (Experiment::Embed, c),
        Command::Gen(c) => (Experiment::Gen, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        set_threads(n);
    }
    let opts = RunOptions {
        out: common.out,
        seed: common.seed,
    };
    let res = match &common.config {
        Some(p) => LabConfig::load(p).and_then(|cfg| run_experiment(kind, Some(&cfg), &opts)),
        None => run_experiment(kind, None, &opts),
    };
    match &res {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            println!("wrote {} files", outcome.files.len());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&res) as u8)
}
