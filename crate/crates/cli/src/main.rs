mod commands;
mod config;
mod draw;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "omnidensity", version, about = "Density-map tooling for omnidirectional counting")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "OMNIDENSITY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    action: Action,
}

#[derive(Debug, Subcommand)]
enum Action {
    #[command(flatten)]
    Step(Command),
    /// Execute a config file or an earlier run manifest.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Write outputs here instead of the configured directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // a run manifest wraps the config
    let value = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(value).with_context(|| format!("{} is not a run config", path.display()))
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match cli.action {
        Action::Step(command) => RunConfig {
            seed: cli.seed,
            command,
        },
        Action::Run(args) => {
            let mut cfg = load_config(&args.config)?;
            if let Some(out) = args.out {
                *cfg.command.out_mut() = Some(out);
            }
            cfg
        }
    };
    log::info!("running {}", cfg.command.name());
    match cli.threads {
        Some(n) => omnidensity::exec::with_threads(n, || commands::dispatch(&cfg)),
        None => commands::dispatch(&cfg),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<omnidensity::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "Io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "Json";
        }
    }
    "Other"
}

fn report(kind: &str, message: String, causes: Vec<String>) {
    let body = json!({ "error": { "kind": kind, "message": message, "causes": causes } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("Usage", e.kind().to_string(), vec![e.render().to_string()]);
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes = e.chain().skip(1).map(|c| c.to_string()).collect();
            report(error_kind(&e), e.to_string(), causes);
            ExitCode::FAILURE
        }
    }
}
