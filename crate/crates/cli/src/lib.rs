//! `trajplan` command-line driver.
//!
//! Every command writes a [`RunManifest`] (resolved settings plus SHA-256
//! digests of inputs and outputs); `trajplan replay` re-runs it and checks
//! the outputs are byte-identical.

pub mod commands;
pub mod config;
mod error;
pub mod files;
pub mod manifest;
pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use trajplan_model::{EncoderVariant, QueryMode};
use trajplan_scenariogen::GenMode;
use trajplan_training::Ablation;

pub use commands::{replay, run_step, AblateStep, EvalStep, GenerateStep, ReportStep, Step, TrainStep};
pub use error::CliError;
pub use manifest::{FileDigest, RunManifest};

use config::{load_config, parse_ablation, parse_mode, parse_pair, parse_query, parse_variant, TrainFlags};
use files::with_suffix;

#[derive(Parser, Debug)]
#[command(name = "trajplan", version, about = "Intent-conditioned multi-modal trajectory planning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic scenario file (JSON lines).
    Generate(GenerateArgs),
    /// Train a model; writes a checkpoint and a CSV log.
    Train(TrainArgs),
    /// Score a checkpoint or stored predictions; writes a JSON report and a table.
    Eval(EvalArgs),
    /// Train and score a grid of variants and ablations.
    Ablate(AblateArgs),
    /// Render loss curves, bird's-eye plots (SVG) and tables.
    Report(ReportArgs),
    /// Re-run a command from its manifest and check outputs are identical.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// standard, multimodal or visual-necessary
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<GenMode>,
    #[arg(long = "d-vis")]
    pub d_vis: Option<usize>,
    /// Emit auxiliary embeddings of widths A,B (needed by the fused query).
    #[arg(long = "aux-dims", value_parser = parse_pair)]
    pub aux_dims: Option<(usize, usize)>,
    #[arg(long = "visual-noise")]
    pub visual_noise: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV log path (default: next to the checkpoint).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    pub checkpoint: Option<PathBuf>,
    /// Stored predictions (JSON lines) instead of a checkpoint.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Score only the checkpoint's validation split.
    #[arg(long)]
    pub val_only: bool,
    /// JSON report path; an aligned table goes next to it as .txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the predictions.
    #[arg(long = "write-predictions")]
    pub write_predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Option<Vec<EncoderVariant>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_ablation)]
    pub ablations: Option<Vec<Ablation>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_query)]
    pub queries: Option<Vec<QueryMode>>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// ablation.json written by `ablate`.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub plots: usize,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of over the recorded paths.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<RunManifest, CliError> {
    match cli.command {
        Command::Generate(a) => {
            let mut gen = load_config(a.config.as_deref())?.generate.unwrap_or_default();
            if let Some(x) = a.n {
                gen.n = x;
            }
            if let Some(x) = a.seed {
                gen.seed = x;
            }
            if let Some(x) = a.mode {
                gen.mode = x;
            }
            if let Some(x) = a.d_vis {
                gen.d_vis = x;
            }
            if let Some(x) = a.aux_dims {
                gen.aux_dims = Some(x);
            }
            if let Some(x) = a.visual_noise {
                gen.visual_noise = x;
            }
            gen.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            run_step(&GenerateStep { gen, out: a.out })
        }
        Command::Train(a) => {
            let mut train = a.flags.resolve(&load_config(a.config.as_deref())?);
            let data = files::read_scenario_file(&a.scenarios)?;
            config::fit_dims(&mut train.model, &data);
            let log = a.log.unwrap_or_else(|| with_suffix(&a.out, ".log.csv"));
            run_step(&TrainStep { scenarios: a.scenarios, out: a.out, log, train })
        }
        Command::Eval(a) => run_step(&EvalStep {
            scenarios: a.scenarios,
            checkpoint: a.checkpoint,
            predictions: a.predictions,
            val_only: a.val_only,
            out: a.out,
            write_predictions: a.write_predictions,
        }),
        Command::Ablate(a) => {
            if a.flags.ablation.is_some() {
                return Err(CliError::Usage("ablate takes --ablations (a list), not --ablation".into()));
            }
            let file = load_config(a.config.as_deref())?;
            let mut train = a.flags.resolve(&file);
            let data = files::read_scenario_file(&a.scenarios)?;
            config::fit_dims(&mut train.model, &data);
            let mut grid = file.ablate.unwrap_or_default();
            if let Some(v) = a.variants {
                grid.variants = v;
            }
            if let Some(v) = a.ablations {
                grid.ablations = v;
            }
            if let Some(v) = a.queries {
                grid.queries = v;
            }
            run_step(&AblateStep { scenarios: a.scenarios, out_dir: a.out, train, grid })
        }
        Command::Report(a) => run_step(&ReportStep {
            scenarios: a.scenarios,
            checkpoint: a.checkpoint,
            log: a.log,
            ablation: a.ablation,
            out_dir: a.out,
            plots: a.plots,
        }),
        Command::Replay(a) => {
            let m = replay(&a.manifest, a.out_dir.as_deref())?;
            eprintln!("replay ok: {} output(s) byte-identical", m.outputs.len());
            Ok(m)
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
