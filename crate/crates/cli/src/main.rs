use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sievebound_cli::{run, write_csv, CliError, Command, Config, ConfigError};

#[derive(Parser)]
#[command(
    name = "sievebound",
    version,
    about = "Desk-scale experiments for sieve bounds on weighted sums"
)]
struct Cli {
    /// Configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; overrides `[output] path`. Defaults to stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Density-class, growth-class and positivity checks.
    ClassCheck,
    /// Congruence-sum residuals against the equidistribution envelope.
    Equidist,
    /// Builds sieve weights, checks their properties and dumps the table.
    SieveVerify,
    /// Sweeps one of the smooth-sum or tail lemmas over the grid.
    Lemma {
        /// 2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7 or 2.10.
        id: String,
    },
    /// Both sides of the upper and lower bounds over the grid.
    Bound {
        /// Append the case error-term exponents and envelopes.
        #[arg(long)]
        envelopes: bool,
    },
    /// Per-case contributions to the left-hand side.
    Cases,
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError {
                line: None,
                message: format!("--threads: {e}"),
            })?;
    }
    let src = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?,
        None => String::new(),
    };
    let cfg = Config::parse(&src)?;
    let command = match cli.command {
        Sub::ClassCheck => Command::ClassCheck,
        Sub::Equidist => Command::Equidist,
        Sub::SieveVerify => Command::SieveVerify,
        Sub::Lemma { id } => Command::Lemma(id),
        Sub::Bound { envelopes } => Command::Bound { envelopes },
        Sub::Cases => Command::Cases,
    };
    let output = cli
        .output
        .or_else(|| cfg.optional_string("output", "path").map(PathBuf::from));
    let table = run(&command, &cfg)?;
    match output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            write_csv(&command, &cfg, &table, &mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            write_csv(&command, &cfg, &table, &mut w)?;
            w.flush()?;
        }
    }
    Ok(table.summary)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(summary) => {
            for line in summary {
                eprintln!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
