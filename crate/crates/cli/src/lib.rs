//! Experiment runner behind the `sievebound` binary.
//!
//! A run reads a [`Config`], executes one [`Command`] against the library and
//! produces a [`Table`], which is written as CSV preceded by a single `#` line
//! listing every parameter the run used.

pub mod commands;
pub mod config;

use std::io::Write;

pub use commands::{run, Command};
pub use config::{Config, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Domain(#[from] sievebound::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `#` lines written after the rows.
    pub trailer: Vec<String>,
    /// Human-readable summary, not part of the CSV.
    pub summary: Vec<String>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form; absent values become empty fields.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv(
    command: &Command,
    cfg: &Config,
    table: &Table,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let params: Vec<String> = cfg
        .used_parameters()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    writeln!(
        out,
        "# sievebound {} {}; {}",
        env!("CARGO_PKG_VERSION"),
        command,
        params.join("; ")
    )?;
    {
        let mut w = csv::WriterBuilder::new().from_writer(&mut *out);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    for line in &table.trailer {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}
