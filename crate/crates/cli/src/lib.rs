//! The `matprod` command-line tool.
//!
//! Exit status: 0 on success, 1 when a runtime error occurs or an `--assert`
//! check fails, 2 on a usage error. `MATPROD_THREADS` caps the number of worker
//! threads; output does not depend on it.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::Parser;

use crate::commands::RunError;
use crate::config::{parse_config, Cli, Format};
use crate::output::{write_csv, write_json, Metadata};

pub const THREADS_VAR: &str = "MATPROD_THREADS";

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_VAR}={v} is not a positive integer")),
        },
    }
}

/// Runs the tool on `args` (including the program name) and returns the exit
/// status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (kind, opts) = cli.command.split();
    let config = match parse_config(kind, opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    let outcome = match pool.install(|| commands::run(&config)) {
        Ok(o) => o,
        Err(RunError::Usage(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
        Err(RunError::Core(e)) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let meta = Metadata {
        command: kind.name(),
        fingerprint: outcome.fingerprint.clone(),
        seed: config.seed,
    };
    let written = match &config.out {
        Some(path) => File::create(path)
            .and_then(|f| emit(BufWriter::new(f), &config.format, &meta, &outcome)),
        None => emit(io::stdout().lock(), &config.format, &meta, &outcome),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return 1;
    }
    if config.assert && outcome.passed == Some(false) {
        eprintln!("check failed");
        return 1;
    }
    0
}

fn emit<W: Write>(
    out: W,
    format: &Format,
    meta: &Metadata,
    outcome: &commands::Outcome,
) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(out, meta, &outcome.table),
        Format::Json => write_json(out, meta, &outcome.table),
    }
}
