//! `drx`: evolutions, sweeps, checks and Monte Carlo runs from TOML configs.

mod commands;
mod config;
mod fail;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::verify::Suite;

#[derive(Parser, Debug)]
#[command(name = "drx", version, about = "Exact evolution of Derrida-Retaux laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the configured initial law and write its trace.
    Evolve {
        config: PathBuf,
        /// Output directory; overrides `outputs.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `log n, log Pi_n` columns.
        #[arg(long)]
        emit_plotdata: bool,
    },
    /// Run a set of checks and write JSON reports.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the growth exponent of the product for several stable exponents.
    SweepAlpha {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma separated; overrides `sweep.alphas`.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        emit_plotdata: bool,
    },
    /// Monte Carlo estimates of E(X_n) and P(X_n = 0).
    Mc {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact scan of the combinatorial sum over tuples.
    Lemma27 {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Evolve {
            config,
            out,
            emit_plotdata,
        } => commands::evolve(&config, out, emit_plotdata),
        Command::Verify { suite, config, out } => commands::verify(suite, &config, out),
        Command::SweepAlpha {
            config,
            out,
            alphas,
            emit_plotdata,
        } => commands::sweep_alpha(&config, out, alphas, emit_plotdata),
        Command::Mc { config, out } => commands::mc(&config, out),
        Command::Lemma27 { config, out } => commands::lemma27(&config, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("drx: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
