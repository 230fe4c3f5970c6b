//! Command-line pipeline: parse scenes, plan and execute edits, compute
//! metrics, and summarize a run.
//!
//! Stages communicate through files under the output directory, so each
//! one can be rerun on its own:
//!
//! ```text
//! <out>/scenes/<frame_id>.json      scene graph cache (parse, edit)
//! <out>/parse_skips.json            frames parse could not handle
//! <out>/edits/<frame_id>/*.png|json edited frames (edit)
//! <out>/edit_summary.json           per-operation counts (edit)
//! <out>/edit_skips.json             frames or plans that failed (edit)
//! <out>/ssim.csv, fid.csv, apa.csv  metric tables (eval)
//! <out>/summary.csv, *.svg, report.md  (report)
//! ```
//!
//! Exit codes: 0 success, 1 fatal configuration or I/O error, 2 partial
//! failure recorded in a skip report.

pub mod backends;
pub mod config;
pub mod edit;
pub mod eval;
pub mod parse;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sceneaug_core::EditOperation;

use crate::config::{BackendMode, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "sceneaug", version, about = "Distractor editing for robot demonstration datasets")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Backend family; overrides the config file.
    #[arg(long, global = true, value_enum)]
    pub backends: Option<BackendMode>,

    /// Frame-level worker threads; overrides the config file.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect and segment every frame and cache its scene graph.
    Parse(DatasetArgs),
    /// Plan and execute edits for every frame.
    Edit(EditArgs),
    /// Compute a metric table.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Summarize metric tables in a run directory into a table and figures.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory; defaults to `output` from the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[command(flatten)]
    pub io: DatasetArgs,
    /// Root seed; required here or in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated operations to run.
    #[arg(long, value_delimiter = ',')]
    pub ops: Option<Vec<EditOperation>>,
    /// Variants per operation.
    #[arg(long)]
    pub variants: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// SSIM between reference frames and candidate frames or edits, matched by frame id.
    Ssim(PairArgs),
    /// Fréchet distance between reference frame features and each candidate group.
    Fid(PairArgs),
    /// Affordance point accuracy per clutter level from a JSONL prediction file.
    Apa(ApaArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Dataset root holding the reference frames.
    #[arg(long)]
    pub reference: PathBuf,
    /// Dataset root or edit output directory to compare.
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the SVG figure.
    #[arg(long)]
    pub no_plot: bool,
}

#[derive(Debug, Args)]
pub struct ApaArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding metric tables from `eval`.
    #[arg(long)]
    pub run: PathBuf,
    /// Where to write the report; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Non-fatal result of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Finished, but some inputs were skipped; see the skip report.
    Partial,
}

impl Status {
    pub fn from_skips(skips: usize) -> Self {
        if skips == 0 {
            Status::Success
        } else {
            Status::Partial
        }
    }
}

pub fn exit_code(result: &Result<Status>) -> i32 {
    match result {
        Ok(Status::Success) => 0,
        Err(_) => 1,
        Ok(Status::Partial) => 2,
    }
}

/// One entry in a skip report.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkipEntry {
    pub frame_id: String,
    pub stage: String,
    pub reason: String,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn output_dir(flag: Option<&PathBuf>, config: &PipelineConfig) -> Result<PathBuf> {
    flag.cloned()
        .or_else(|| config.output.clone())
        .context("no output directory: pass --out or set `output` in the config file")
}

/// Config file (or defaults), then `NICE_ENDPOINT_*`, then global flags.
pub fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    config.apply_env_overrides(|k| std::env::var(k).ok());
    if let Some(mode) = cli.backends {
        config.backends.mode = mode;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    Ok(config)
}

pub fn run(cli: Cli) -> Result<Status> {
    let mut config = effective_config(&cli)?;
    match &cli.command {
        Command::Parse(args) => {
            config.validate()?;
            let out = output_dir(args.out.as_ref(), &config)?;
            parse::run(&args.dataset, &out, &config)
        }
        Command::Edit(args) => {
            if let Some(seed) = args.seed {
                config.seed = Some(seed);
            }
            if let Some(ops) = &args.ops {
                config.planner.operations_enabled = ops.iter().copied().collect();
            }
            if let Some(v) = args.variants {
                config.planner.variants_per_operation = v;
            }
            config.validate()?;
            let out = output_dir(args.io.out.as_ref(), &config)?;
            edit::run(&args.io.dataset, &out, &config)
        }
        Command::Eval(kind) => {
            config.validate()?;
            match kind {
                EvalCommand::Ssim(a) => {
                    let out = output_dir(a.out.as_ref(), &config)?;
                    eval::run_ssim(&a.reference, &a.candidate, &out, !a.no_plot)
                }
                EvalCommand::Fid(a) => {
                    let out = output_dir(a.out.as_ref(), &config)?;
                    eval::run_fid(&a.reference, &a.candidate, &out, !a.no_plot, &config)
                }
                EvalCommand::Apa(a) => {
                    let out = output_dir(a.out.as_ref(), &config)?;
                    eval::run_apa(&a.predictions, &out)
                }
            }
        }
        Command::Report(args) => {
            let out = args.out.clone().unwrap_or_else(|| args.run.clone());
            report::run(&args.run, &out)
        }
    }
}

/// Rayon pool capped at the configured worker count.
pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")
}
