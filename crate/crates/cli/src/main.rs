//! `csikit`: batch front end for synthesis, extraction, evaluation,
//! artifact auditing and parameter search.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage, config
//! or schema error. Every failure prints a diagnostic on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csikit_core::eval::EvalMode;

#[derive(Debug, Parser)]
#[command(name = "csikit", version, about = "PPG cardiovascular stability index toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus and its manifest.
    Synth(SynthArgs),
    /// Score every window of a dataset and summarize validity per scale.
    Extract(ExtractArgs),
    /// Run the held-out evaluation protocol in one mode.
    Eval(EvalArgs),
    /// Run the corrected protocol and every artifact mode over a seed list.
    Audit(AuditArgs),
    /// Search pipeline parameters on the development records.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Calibrated two-class corpus.
    Default,
    /// Covariate-shifted corpus for the artifact comparison.
    Shifted,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus spec JSON; fields left out take the preset's values.
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    pub preset: Preset,
    /// Overrides the spec's seed.
    #[arg(long, env = "CSIKIT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Versioned config JSON; the shipped defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Window stride in samples; overrides the config.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Window lengths to score, comma separated. Defaults to the config
    /// window plus the multiscale scales.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "corrected", value_parser = parse_mode)]
    pub mode: EvalMode,
    /// Protocol seed; the config seed when omitted.
    #[arg(long, env = "CSIKIT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Requests the held-out set a second time, which must fail.
    #[arg(long, hide = true)]
    pub reaccess_test: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Fixed dataset; the seed list then varies only the protocol.
    #[arg(long, required_unless_present_any = ["spec", "preset"])]
    pub manifest: Option<PathBuf>,
    /// Synthetic corpus spec, regenerated with each seed.
    #[arg(long, conflicts_with_all = ["manifest", "preset"])]
    pub spec: Option<PathBuf>,
    /// Synthetic preset, regenerated with each seed.
    #[arg(long, value_enum, conflicts_with = "manifest")]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Seed list, comma separated.
    #[arg(long, env = "CSIKIT_SEED", value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 300)]
    pub trials: usize,
    /// Random-startup trials before the density model takes over; capped at
    /// the trial count.
    #[arg(long, default_value_t = 30)]
    pub startup: usize,
    #[arg(long, env = "CSIKIT_SEED")]
    pub seed: Option<u64>,
    /// Trials evaluated in parallel per batch.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse::<EvalMode>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Audit(a) => commands::audit(&a),
        Command::Optimize(a) => commands::optimize(&a),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
