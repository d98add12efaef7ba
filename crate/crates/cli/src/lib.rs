//! Command-line surface of the mammogram classifier: `prepare`, `train`,
//! `eval`, `predict` and `inspect`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mammonet_core::dataset::Split;
use mammonet_core::Error;

pub use config::RunConfig;

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Dimension(_) | Error::Input(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::UnsupportedImage(_) => 3,
        Error::Numeric(_) | Error::State(_) => 4,
    }
}

#[derive(Debug, Parser)]
#[command(name = "mammonet", version, about = "Three-class mammogram CNN: normal, benign, malignant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a class-labelled image tree, condition every image to 225x225
    /// and write a split manifest.
    Prepare(PrepareArgs),
    /// Train the reference network on a prepared manifest.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Classify one image.
    Predict(PredictArgs),
    /// Print the layer table of a checkpoint or the reference model.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for initialization, splitting, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PreprocessArgs {
    /// Odd median-filter window (1 disables).
    #[arg(long)]
    pub median_window: Option<usize>,
    /// Histogram equalization on or off.
    #[arg(long, value_name = "BOOL")]
    pub equalize: Option<bool>,
    /// Crop box `x,y,w,h` applied before resizing, or `none`.
    #[arg(long, value_name = "X,Y,W,H")]
    pub roi: Option<String>,
    /// Side of the network input; the reference network needs 225.
    #[arg(long)]
    pub target_side: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Passes over the training split.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Samples per Adam step; gradients are averaged over the batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Adam first-moment decay.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam second-moment decay.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Adam denominator offset.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Drop probability of the dropout layer before the dense stack.
    #[arg(long)]
    pub dropout_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitArgs {
    /// Train share of each class; the eval share is the remainder.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Root holding `normal/`, `benign/` and `malignant/`.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Also tile each conditioned image into square patches of this side.
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Overlap between neighbouring patches in pixels.
    #[arg(long)]
    pub patch_overlap: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Manifest written by `prepare`.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint to score; defaults to `<out>/best.ckpt`.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Which split to score.
    #[arg(long, value_name = "SPLIT", value_parser = ["train", "eval"])]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trained checkpoint; without it a freshly initialized model built
    /// from `--seed` is used.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// PGM or PNG image to classify.
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    /// The image is already conditioned to 225x225; skip preprocessing.
    #[arg(long)]
    pub prepared: bool,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_name = "FILE", conflicts_with = "reference")]
    pub checkpoint: Option<PathBuf>,
    /// Describe a freshly built reference model instead of a checkpoint.
    #[arg(long)]
    pub reference: bool,
}

macro_rules! overlay {
    ($cfg:ident, $args:expr; $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = v;
        })+
    };
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    overlay!(cfg, common; seed, out);
    Ok(cfg)
}

fn apply_preprocess(cfg: &mut RunConfig, p: &PreprocessArgs) -> Result<(), Error> {
    overlay!(cfg, p; median_window, equalize, target_side);
    if let Some(roi) = &p.roi {
        cfg.set("roi", roi)?;
    }
    Ok(())
}

fn apply_split(cfg: &mut RunConfig, s: &SplitArgs) {
    if let Some(t) = s.train_fraction {
        cfg.train_fraction = t;
        cfg.eval_fraction = 1.0 - t;
    }
}

impl Command {
    /// Configuration file plus flag overrides, validated.
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg;
        match self {
            Command::Prepare(a) => {
                cfg = base_config(&a.common)?;
                if let Some(d) = &a.data {
                    cfg.data_root = Some(d.clone());
                }
                apply_preprocess(&mut cfg, &a.preprocess)?;
                apply_split(&mut cfg, &a.split);
                overlay!(cfg, a; patch_size, patch_overlap);
            }
            Command::Train(a) => {
                cfg = base_config(&a.common)?;
                if let Some(m) = &a.manifest {
                    cfg.manifest = Some(m.clone());
                }
                overlay!(cfg, a.hyper; epochs, batch_size, learning_rate, beta1, beta2, epsilon, dropout_rate);
                apply_split(&mut cfg, &a.split);
            }
            Command::Eval(a) => {
                cfg = base_config(&a.common)?;
                if let Some(m) = &a.manifest {
                    cfg.manifest = Some(m.clone());
                }
                if let Some(c) = &a.checkpoint {
                    cfg.checkpoint = Some(c.clone());
                }
                if let Some(s) = &a.split {
                    cfg.eval_split = s.parse::<Split>()?;
                }
            }
            Command::Predict(a) => {
                cfg = base_config(&a.common)?;
                if let Some(c) = &a.checkpoint {
                    cfg.checkpoint = Some(c.clone());
                }
                apply_preprocess(&mut cfg, &a.preprocess)?;
            }
            Command::Inspect(a) => {
                cfg = base_config(&a.common)?;
                if let Some(c) = &a.checkpoint {
                    cfg.checkpoint = Some(c.clone());
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Prepare(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Predict(a) => &a.common,
            Command::Inspect(a) => &a.common,
        }
    }

    /// Runs the command, printing its report to stdout.
    pub fn execute(&self) -> Result<(), Error> {
        let cfg = self.resolve()?;
        let explicit_out = self.common().out.is_some();
        let text = match self {
            Command::Prepare(_) => commands::prepare(&cfg)?,
            Command::Train(_) => commands::train(&cfg)?,
            Command::Eval(_) => commands::eval(&cfg)?,
            Command::Predict(a) => {
                let text = commands::predict(&cfg, &a.image, a.prepared)?;
                if explicit_out {
                    commands::write_text(&cfg.out, "prediction.txt", &text)?;
                }
                text
            }
            Command::Inspect(a) => {
                let text = commands::inspect(&cfg, a.reference)?;
                if explicit_out {
                    commands::write_text(&cfg.out, "inspect.txt", &text)?;
                }
                text
            }
        };
        print!("{text}");
        Ok(())
    }
}

fn init_logging() -> Result<(), Error> {
    let level = match std::env::var("MAMMONET_LOG").as_deref() {
        Err(_) | Ok("") | Ok("info") => log::LevelFilter::Info,
        Ok("error") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(Error::Config(format!(
                "MAMMONET_LOG must be error, info or debug, got {other:?}"
            )))
        }
    };
    // a second initialization (in-process tests) keeps the first logger
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = init_logging().and_then(|()| cli.command.execute());
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
