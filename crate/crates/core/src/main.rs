use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use csa_game::config::RunConfig;
use csa_game::run::{exit, run, Mode};
use csa_game::EngineError;

/// Contingent-CSA switching game engine.
#[derive(Debug, Parser)]
#[command(name = "csa-game", version)]
struct Cli {
    /// Mode to run (may also be given with --mode).
    #[arg(value_enum)]
    mode: Option<Mode>,
    #[arg(long = "mode", value_enum, conflicts_with = "mode")]
    mode_flag: Option<Mode>,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override model.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path override, e.g. --set solver.max_switches=3 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(mode) = cli.mode.or(cli.mode_flag) else {
        eprintln!("error: a mode is required (simulate, value, game, symmetric, oracle, residuals, validate)");
        return ExitCode::from(exit::INVALID as u8);
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(exit::RUNTIME as u8);
        }
    }

    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("model.seed={seed}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("output.dir={}", toml::Value::String(out.display().to_string())));
    }
    let config = match RunConfig::load(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e @ EngineError::Io(_)) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(exit::RUNTIME as u8);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::INVALID as u8);
        }
    };

    match run(&config, mode) {
        Ok(report) => {
            if let Some(d) = report.summary.get("diagnostics").and_then(|d| d.as_array()) {
                for line in d {
                    println!("{}", line.as_str().unwrap_or_default());
                }
            } else {
                println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                EngineError::Config(_) | EngineError::NotPsd { .. } | EngineError::Symmetry(_) => exit::INVALID,
                _ => exit::RUNTIME,
            };
            ExitCode::from(code as u8)
        }
    }
}
