use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dasr_core::losses::TransMode;
use dasr_core::models::{GeneratorPreset, PriorDepth};
use dasr_core::pipeline::TrainConfig;

fn defaults() -> TrainConfig {
    TrainConfig::default()
}

#[derive(Parser, Debug)]
#[command(
    name = "dasr",
    version,
    about = "Infrared super-resolution with texture- and noise-oriented adaptation",
    long_about = "Infrared super-resolution with texture- and noise-oriented adaptation.\n\n\
                  Verbosity is set by DASR_LOG (quiet, info, debug; default info)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate paired synthetic IR/visible scenes and a manifest.
    Synth(SynthArgs),
    /// Blur, downscale and add noise to images.
    Degrade(DegradeArgs),
    /// Run stage 1 or stage 2 training.
    Train(TrainArgs),
    /// Evaluate a checkpoint against HR images and the bicubic baseline.
    Eval(EvalArgs),
    /// PSNR / MSE / SSIM for name-matched HR and SR images.
    Metrics(MetricsArgs),
    /// Write max-normalized Sobel magnitude maps.
    Sobel(SobelArgs),
    /// Write |HR − SR| heatmaps and print the mean residual.
    #[command(visible_alias = "residual-map")]
    Residual(ResidualArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of image pairs.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Square HR extent in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Upscaling factor recorded in the manifest.
    #[arg(long, default_value_t = 2, value_parser = parse_scale)]
    pub scale: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    /// Input image or directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = parse_scale)]
    pub scale: usize,
    #[arg(long, default_value_t = 0.0)]
    pub blur_sigma: f32,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Manifest file or a directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON file with TrainConfig fields; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stage-1 checkpoint (required for stage 2).
    #[arg(long, required_if_eq("stage", "2"))]
    pub ckpt_in: Option<PathBuf>,
    #[arg(long)]
    pub ckpt_out: PathBuf,
    /// Loss CSV path [default: checkpoint path with .csv extension].
    #[arg(long)]
    pub log_csv: Option<PathBuf>,
    /// Step count for the selected stage (overrides steps-stage1/2).
    #[arg(long)]
    pub steps: Option<u64>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

/// One flag per TrainConfig field. Defaults are TrainConfig's.
#[derive(Args, Debug)]
pub struct ConfigFlags {
    #[arg(long, default_value_t = defaults().scale, value_parser = parse_scale)]
    pub scale: usize,
    #[arg(long, default_value_t = defaults().lr)]
    pub lr: f32,
    #[arg(long, default_value_t = defaults().adam_beta1)]
    pub adam_beta1: f32,
    #[arg(long, default_value_t = defaults().adam_beta2)]
    pub adam_beta2: f32,
    #[arg(long, default_value_t = defaults().adam_eps)]
    pub adam_eps: f32,
    #[arg(long, default_value_t = defaults().batch)]
    pub batch: usize,
    /// LR crop side in pixels.
    #[arg(long, default_value_t = defaults().lr_crop)]
    pub lr_crop: usize,
    #[arg(long, default_value_t = defaults().steps_stage1)]
    pub steps_stage1: u64,
    #[arg(long, default_value_t = defaults().steps_stage2)]
    pub steps_stage2: u64,
    /// Weight of the noise adversarial loss.
    #[arg(long, default_value_t = defaults().alpha)]
    pub alpha: f32,
    /// Weight of the prior (texture) loss in the discriminator objective.
    #[arg(long, default_value_t = defaults().beta)]
    pub beta: f32,
    /// Weight of the generator's adversarial term.
    #[arg(long, default_value_t = defaults().gamma)]
    pub gamma: f32,
    #[arg(long, default_value_t = PriorDepthArg(defaults().prior_depth))]
    pub prior_depth: PriorDepthArg,
    #[arg(long, default_value_t = TransModeArg(defaults().trans_mode))]
    pub trans_mode: TransModeArg,
    #[arg(long, default_value_t = defaults().noise_sigma)]
    pub noise_sigma: f32,
    /// Stage 2 generator includes the adversarial term.
    #[arg(long, default_value_t = defaults().adv_enabled, action = clap::ArgAction::Set)]
    pub adv_enabled: bool,
    /// Stage 1 generator includes the adversarial term.
    #[arg(long, default_value_t = defaults().adv_stage1, action = clap::ArgAction::Set)]
    pub adv_stage1: bool,
    #[arg(long, default_value_t = defaults().d_trans_enabled, action = clap::ArgAction::Set)]
    pub d_trans_enabled: bool,
    #[arg(long, default_value_t = defaults().replay_ir, action = clap::ArgAction::Set)]
    pub replay_ir: bool,
    #[arg(long, default_value_t = defaults().copy_main, action = clap::ArgAction::Set)]
    pub copy_main: bool,
    /// Global-norm gradient clip; 0 disables.
    #[arg(long, default_value_t = defaults().grad_clip)]
    pub grad_clip: f32,
    /// Generator weight-average decay; 0 keeps the last iterate.
    #[arg(long, default_value_t = defaults().ema_decay)]
    pub ema_decay: f32,
    /// Comma-separated per-stage feature weights [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub feature_weights: Option<Vec<f32>>,
    #[arg(long, default_value_t = defaults().seed)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PresetArg::from(defaults().preset))]
    pub preset: PresetArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    PaperScale,
}

impl From<GeneratorPreset> for PresetArg {
    fn from(p: GeneratorPreset) -> Self {
        match p {
            GeneratorPreset::Desk => PresetArg::Desk,
            GeneratorPreset::PaperScale => PresetArg::PaperScale,
        }
    }
}

impl From<PresetArg> for GeneratorPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => GeneratorPreset::Desk,
            PresetArg::PaperScale => GeneratorPreset::PaperScale,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PriorDepthArg(pub PriorDepth);

impl std::str::FromStr for PriorDepthArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(PriorDepthArg)
    }
}

impl std::fmt::Display for PriorDepthArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TransModeArg(pub TransMode);

impl std::str::FromStr for TransModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(TransModeArg)
    }
}

impl std::fmt::Display for TransModeArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Md,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint to evaluate (not needed with --self-check).
    #[arg(long, required_unless_present = "self_check")]
    pub ckpt: Option<PathBuf>,
    /// Manifest file or a directory containing manifest.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for SR images and the results table.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub table: TableFormat,
    /// Score HR images against themselves instead of running a model.
    #[arg(long)]
    pub self_check: bool,
    /// Override the manifest's blur sigma.
    #[arg(long)]
    pub blur_sigma: Option<f32>,
    /// Override the manifest's noise sigma.
    #[arg(long)]
    pub noise_sigma: Option<f32>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// HR image or directory.
    #[arg(long)]
    pub hr: PathBuf,
    /// SR image or directory; files are matched to HR by name.
    #[arg(long)]
    pub sr: PathBuf,
}

#[derive(Args, Debug)]
pub struct SobelArgs {
    /// Input image or directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ResidualArgs {
    #[arg(long)]
    pub hr: PathBuf,
    #[arg(long)]
    pub sr: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_scale(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v @ (2 | 4)) => Ok(v),
        _ => Err(format!("scale must be 2 or 4, got '{s}'")),
    }
}
