//! Command-line front end: argument parsing, run configuration, the
//! checkpoint codec and the subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mapseg::data::Partition;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mapseg", version, about = "Segment scanned land-use maps with a U-Net trained on the CPU")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// key=value run configuration; flags override it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Class palette file (`index name r g b` lines)
    #[arg(long, global = true, value_name = "PATH")]
    pub palette: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Denoising steps, e.g. `mode:3,open:3,close:3` or `none`
    #[arg(long, global = true, value_name = "SPEC")]
    pub postprocess: Option<String>,
    /// Worker threads; 1 gives the bit-reproducible reference behavior
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus with manifest and palette to --out
    GenData {
        /// Number of maps (overrides `maps`)
        #[arg(long)]
        maps: Option<usize>,
    },
    /// Train on --manifest and write --checkpoint (report CSV to --out)
    Train,
    /// Segment images with --checkpoint into --out
    Predict {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write per-class probability images
        #[arg(long)]
        probabilities: bool,
    },
    /// Score label images (--pred/--gt) or a checkpoint on a manifest partition
    Eval {
        #[arg(long, num_args = 1..)]
        pred: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        gt: Vec<PathBuf>,
        #[arg(long, default_value = "test")]
        partition: Partition,
    },
    /// gen-data, train, predict and eval under --out
    Pipeline,
}

impl CommonArgs {
    /// The config file (if any) with flag overrides applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(p) = &self.palette {
            config.palette = Some(p.clone());
        }
        if let Some(spec) = &self.postprocess {
            config.set("postprocess", spec)?;
        }
        Ok(config)
    }

    fn required<'a>(&self, value: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a PathBuf, CliError> {
        value
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{command} needs --{flag}")))
    }
}

/// Runs one parsed invocation; progress goes to `log`, results to `print`.
pub fn run(cli: &Cli, log: &mut dyn FnMut(&str), print: &mut dyn FnMut(&str)) -> Result<(), CliError> {
    let c = &cli.common;
    let mut config = c.resolve()?;
    match &cli.command {
        Command::GenData { maps } => {
            if let Some(n) = maps {
                config.maps = *n;
            }
            let out = c.required(&c.out, "out", "gen-data")?;
            let manifest = commands::gen_data(&config, out)?;
            print(&format!("wrote {} maps to {}", manifest.entries.len(), out.display()));
        }
        Command::Train => {
            let manifest = c.required(&c.manifest, "manifest", "train")?;
            let ckpt = c.required(&c.checkpoint, "checkpoint", "train")?;
            let report = c.out.as_ref().map(|d| d.join("train_report.csv"));
            let r = commands::train(&config, manifest, ckpt, report.as_deref(), log)?;
            print(&format!(
                "best_epoch={} cv_mean_jaccard={:.6}",
                r.best_epoch, r.best_cv_mean_jaccard
            ));
        }
        Command::Predict { inputs, probabilities } => {
            config.probabilities |= probabilities;
            let ckpt = c.required(&c.checkpoint, "checkpoint", "predict")?;
            let out = c.required(&c.out, "out", "predict")?;
            for path in commands::predict(&config, ckpt, inputs, out)? {
                print(&path.display().to_string());
            }
        }
        Command::Eval { pred, gt, partition } => {
            let csv = c.out.as_ref().map(|d| d.join("metrics.csv"));
            let eval = if !pred.is_empty() || !gt.is_empty() {
                commands::eval_files(&config, pred, gt, csv.as_deref())?
            } else {
                let ckpt = c.required(&c.checkpoint, "checkpoint", "eval without --pred/--gt")?;
                let manifest = c.required(&c.manifest, "manifest", "eval without --pred/--gt")?;
                let (raw, post) = commands::eval_model(&config, ckpt, manifest, *partition, None)?;
                print(&format!("raw {}", commands::summary_line(&raw.summary()?)));
                let palette = commands::resolve_palette(&config, Some(manifest))?;
                commands::write_metrics(&post, &palette, csv.as_deref())?
            };
            print(&commands::summary_line(&eval));
        }
        Command::Pipeline => {
            let out = c.required(&c.out, "out", "pipeline")?;
            let s = commands::pipeline(&config, out, log)?;
            print(&format!("raw {}", commands::summary_line(&s.raw)));
            print(&commands::summary_line(&s.postprocessed));
            print(&format!("seconds={:.1}", s.seconds));
        }
    }
    Ok(())
}
