use std::fs;
use std::process::ExitCode;

use ames_cli::{configure_threads, run, sweep, sweep_table, Cli, RunError};
use clap::Parser;
use serde::Serialize;

fn emit<T: Serialize>(cli: &Cli, value: &T) -> Result<(), String> {
    let json = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match &cli.out {
        Some(path) => fs::write(path, json + "\n").map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| {
        let cfg = cli.config();
        if cli.sweep.is_empty() {
            let r = run(&cfg)?;
            Ok((serde_json::to_value(&r), r.converged, None))
        } else {
            let sw = sweep(&cfg, &cli.sweep)?;
            let ok = sw.points.iter().all(|p| p.report.as_ref().is_some_and(|r| r.converged));
            Ok::<_, RunError>((serde_json::to_value(&sw), ok, Some(sweep_table(&sw))))
        }
    });
    let (value, converged, table) = match outcome {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = value.map_err(|e| e.to_string()).and_then(|v| emit(&cli, &v));
    if let Err(e) = written {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(2);
    }
    if let Some(t) = table {
        eprint!("{t}");
    }
    if converged || cli.no_fail_on_diverge {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
