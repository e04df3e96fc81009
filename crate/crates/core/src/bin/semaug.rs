use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semaug::config::RunConfig;
use semaug::pipeline;
use semaug::{Error, Result};

/// Multi-level semantic feature augmentation for few-shot classification.
///
/// Settings come from built-in defaults, then --config, then --set, then
/// --seed and --workers; later sources win.
#[derive(Parser)]
#[command(name = "semaug", version)]
struct Cli {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic base/novel benchmark.
    GenSynth,
    /// Train a TriNet (and the extractor) on the base split.
    Train,
    /// Build the SVD semantic space from class similarities.
    Svd,
    /// Synthesize features for a support split.
    Augment,
    /// Episodic N-way K-shot evaluation.
    Eval,
    /// Recover an input from its features.
    Invert,
    /// Export extracted features or semantic encodings.
    Export,
    /// Print the resolved configuration.
    ShowConfig,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut pairs = vec![];
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    if let Some(w) = cli.workers {
        pairs.push(("workers".into(), w.to_string()));
    }
    cfg.apply(&pairs)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve(cli)?;
    let outcome = match cli.command {
        Command::GenSynth => pipeline::cmd_gen_synth(&cfg)?,
        Command::Train => pipeline::cmd_train(&cfg)?,
        Command::Svd => pipeline::cmd_svd(&cfg)?,
        Command::Augment => pipeline::cmd_augment(&cfg)?,
        Command::Eval => pipeline::cmd_eval(&cfg)?.0,
        Command::Invert => pipeline::cmd_invert(&cfg)?,
        Command::Export => pipeline::cmd_export(&cfg)?,
        Command::ShowConfig => return Ok(cfg.to_text().trim_end().to_string()),
    };
    Ok(outcome.summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("semaug: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
