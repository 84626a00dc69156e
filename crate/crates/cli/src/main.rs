mod args;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use mirm_core::MirmError;
use serde_json::json;

use crate::args::Cli;
use crate::commands::Outcome;

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ASSERT: u8 = 4;

fn exit_code(e: &MirmError) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

fn init_threads() -> Result<(), MirmError> {
    let Ok(v) = std::env::var("MIRM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| MirmError::InvalidInput(format!("MIRM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| MirmError::InvalidInput(format!("thread pool: {e}")))
}

fn report(cli: &Cli, outcome: &Outcome, seconds: f64) -> serde_json::Value {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    json!({
        "command": argv,
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": outcome.seeds,
        "wall_clock_seconds": seconds,
        "conventions": outcome.conventions.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "summary": outcome.summary.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
        "assert": match (cli.common.check, outcome.check) {
            (false, _) => json!("not requested"),
            (true, Some(true)) => json!("passed"),
            (true, Some(false)) => json!("failed"),
            (true, None) => json!("no check for this command"),
        },
    })
}

fn report_path(out: &std::path::Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("mirm: {e}");
        return ExitCode::from(EXIT_INVALID);
    }
    let start = Instant::now();
    let outcome = match commands::run(&cli.command, &cli.common) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("mirm: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    if let Err(e) = output::emit_csv(&outcome.table, cli.common.out.as_deref()) {
        eprintln!("mirm: {e}");
        return ExitCode::from(EXIT_INVALID);
    }
    let rep = serde_json::to_string_pretty(&report(&cli, &outcome, seconds)).expect("report serializes");
    match &cli.common.out {
        Some(p) => {
            if let Err(e) = std::fs::write(report_path(p), rep + "\n") {
                eprintln!("mirm: {e}");
                return ExitCode::from(EXIT_INVALID);
            }
        }
        None => eprintln!("{rep}"),
    }
    if cli.common.check && outcome.check == Some(false) {
        eprintln!("mirm: acceptance check failed");
        return ExitCode::from(EXIT_ASSERT);
    }
    ExitCode::SUCCESS
}
