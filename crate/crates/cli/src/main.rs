use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use membrane_cli::{error_record, parse_config, resolve_paths, run, Command};

/// Two-phase membrane solver, optimal control and verification runs.
#[derive(Parser, Debug)]
#[command(name = "membrane-opt", version)]
struct Args {
    command: Command,
    /// Line-based `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config (default: `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main_inner(args: &Args) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = parse_config(&text, args.command)?;
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    resolve_paths(&mut cfg, &base);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&cfg, &text, &out)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    Ok(outcome.success)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{}", serde_json::json!({ "error": "checks_failed", "message": "one or more checks failed; see checks.jsonl" }));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
