use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bnnprune_cli::RunConfig;
use clap::Parser;

/// Trains, prunes and analyses binary networks.
#[derive(Parser, Debug)]
#[command(name = "bnnprune", version)]
struct Args {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// train | prune | baseline-layerwise | baseline-cascade | analyze | compare
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn config(args: &Args) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        c.merge_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for kv in &args.sets {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
        c.set(k.trim(), v)?;
    }
    if let Some(m) = &args.mode {
        c.set("mode", m)?;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(o) = &args.out {
        c.out = o.clone();
    }
    Ok(c)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match config(&args).and_then(|c| bnnprune_cli::run(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
