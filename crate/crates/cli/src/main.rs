//! `epsapprox` command-line front end.
//!
//! Exit codes: 0 on success, 2 on argument errors (with usage), 1 on domain
//! errors (with a JSON error object on stderr). Every successful run writes
//! `<primary output>.manifest.json`.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde::Serialize;

use args::Cli;
use manifest::{sibling, Recorder};

#[derive(Serialize)]
struct ErrorReport {
    error: &'static str,
    message: String,
}

fn kind(e: &epsapprox::Error) -> &'static str {
    use epsapprox::Error::*;
    match e {
        Dimension(_) => "dimension",
        Invalid(_) => "invalid",
        Size(_) => "size",
        Unsupported(_) => "unsupported",
        Degenerate(_) => "degenerate",
        Parse(_) | Json(_) | Csv(_) => "parse",
        Io(_) => "io",
    }
}

/// Prints a clap error with a usage line and exits 2; help and version exit 0.
fn usage_exit(e: clap::Error) -> ! {
    if !e.use_stderr() {
        e.exit();
    }
    let text = e.render().to_string();
    eprint!("{text}");
    if !text.contains("Usage") {
        eprintln!("\n{}", Cli::command().render_usage());
    }
    std::process::exit(2);
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => usage_exit(e),
    };
    if cli.threads == 0 {
        usage_exit(clap::Error::raw(clap::error::ErrorKind::InvalidValue, "--threads must be at least 1\n"));
    }
    // a global pool can only fail to build if one already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();

    let mut rec = Recorder::new();
    let result = commands::run(&cli.command, cli.seed, &mut rec)
        .and_then(|primary| rec.write(&cli, &argv, &sibling(&primary, "manifest.json")));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport { error: kind(&e), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&report).expect("plain struct serializes"));
            ExitCode::from(1)
        }
    }
}
