mod artifacts;
mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

/// Batch runner for the time-fractional diffusion solvers. A run reads one
/// JSON configuration and writes CSV/JSON artifacts plus `manifest.json`;
/// on failure only `diagnostic.json` is left in the output directory.
#[derive(Debug, Parser)]
#[command(name = "fracdiff", version = env!("FRACDIFF_VERSION"))]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `output_dir` in the configuration).
    #[arg(long, env = "FRACDIFF_OUTPUT_DIR")]
    output: Option<PathBuf>,

    /// Monte Carlo seed (overrides `mc.seed`).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Validation(vec![config::Diagnostic {
            path: "$".into(),
            message: format!("cannot read {}: {e}", args.config.display()),
        }])
    })?;
    let mut cfg = config::validate(&text).map_err(CliError::Validation)?;
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
        if let Some(mc) = cfg.echo.get_mut("mc") {
            mc["seed"] = json!(seed);
        }
        cfg.defaults_applied.retain(|d| d != "mc.seed");
    }
    Ok(cfg)
}

fn output_dir(args: &Args, cfg: Option<&RunConfig>) -> PathBuf {
    args.output
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(args: &Args, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let start = Instant::now();
    let commands::Outcome { mut artifacts, summary } = commands::run(cfg)?;
    let checksums: serde_json::Map<_, _> = artifacts.checksums().into_iter().map(|(n, h)| (n, json!(h))).collect();
    let manifest = json!({
        "version": env!("FRACDIFF_VERSION"),
        "command": cfg.command.name(),
        "config": cfg.echo,
        "defaults_applied": cfg.defaults_applied,
        "threads": fracdiff::exec::thread_count(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "artifacts": checksums,
    });
    artifacts.json("manifest.json", &manifest)?;
    artifacts.commit(&output_dir(args, Some(cfg)))?;
    Ok(summary)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if !fracdiff::exec::init_threads(args.threads) {
        log::warn!("thread pool already initialised; --threads ignored");
    }
    let mut cfg = None;
    let e = match load(&args).and_then(|c| execute(&args, cfg.insert(c))) {
        Ok(summary) => {
            for line in summary {
                println!("{line}");
            }
            return ExitCode::SUCCESS;
        }
        Err(e) => e,
    };
    let dir = output_dir(&args, cfg.as_ref());
    let diag = e.to_diagnostic();
    eprintln!("error: {e}");
    if let CliError::Validation(d) = &e {
        for d in d {
            eprintln!("  {d}");
        }
    }
    if let Err(io) = artifacts::write_failure(&dir, &diag) {
        eprintln!("error: could not write diagnostic to {}: {io}", dir.display());
    }
    ExitCode::from(e.exit_code() as u8)
}
