use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Super-resolution MRI reconstruction: simulate data, reconstruct, train, evaluate.
#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(name = "srr", version, about, propagate_version = true)]
pub struct Cli {
    /// Global seed; every stage seed is derived from it.
    #[arg(long, env = "SRR_SEED", default_value_t = 0, global = true)]
    pub seed: u64,
    /// Worker threads for per-record work.
    #[arg(long, default_value_t = 1, global = true)]
    pub jobs: usize,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Generate a phantom dataset with a manifest.
    Simulate(SimulateArgs),
    /// Generate a sampling mask.
    Mask(MaskArgs),
    /// Classical reconstruction of one acquisition or every test record.
    Recon(ReconArgs),
    /// Train the unrolled network on a dataset.
    Train(TrainArgs),
    /// Reconstruct with a trained checkpoint.
    Infer(InferArgs),
    /// Score reconstructions against the dataset ground truth.
    Eval(EvalArgs),
    /// Run the three acquisition strategies side by side on the test records.
    Compare(CompareArgs),
    /// Repeat the run recorded in a run.json, writing into a new directory.
    Rerun(RerunArgs),
}

/// Grid sizes written `64,64` or `64x64`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dims(pub Vec<usize>);

impl std::str::FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Dims, String> {
        let dims: Result<Vec<usize>, _> = s.split([',', 'x']).map(|p| p.trim().parse::<usize>()).collect();
        match dims {
            Ok(d) if !d.is_empty() && !d.contains(&0) => Ok(Dims(d)),
            _ => Err(format!("expected positive sizes like 64,64, got {s:?}")),
        }
    }
}

impl std::ops::Deref for Dims {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKindArg {
    Poisson,
    Uniform,
    Center,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub records: usize,
    #[arg(long, default_value = "64,64")]
    pub hr_dims: Dims,
    #[arg(long, default_value = "32,32")]
    pub lr_dims: Dims,
    #[arg(long, default_value_t = 8)]
    pub coils: usize,
    #[arg(long, default_value_t = 4.0)]
    pub af: f64,
    #[arg(long, default_value = "8,8")]
    pub center: Dims,
    #[arg(long, value_enum, default_value_t = MaskKindArg::Poisson)]
    pub mask_kind: MaskKindArg,
    /// Noise standard deviation per real/imaginary component.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 8)]
    pub shapes: usize,
    /// Give every shape a smooth random phase.
    #[arg(long)]
    pub complex_phase: bool,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub val_fraction: f64,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct MaskArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dims: Dims,
    #[arg(long, default_value_t = 4.0)]
    pub af: f64,
    #[arg(long, default_value = "8,8")]
    pub center: Dims,
    #[arg(long, value_enum, default_value_t = MaskKindArg::Poisson)]
    pub kind: MaskKindArg,
    /// Report the equivalent acceleration against this target grid.
    #[arg(long)]
    pub hr_dims: Option<Dims>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconMethod {
    /// Adjoint of the HR acquisition.
    Zerofill,
    /// Proximal gradient on the HR model.
    Pgd,
    /// Zero-filled LR image, k-space interpolated to HR.
    Ki,
    /// Proximal gradient on the LR grid, k-space interpolated to HR.
    Strategy2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxArg {
    Identity,
    Soft,
    Haar,
}

/// Either a single acquisition (`--input`, `--mask`, `--sens`) or the test
/// records of a dataset (`--manifest`).
#[derive(Debug, Args, Serialize, Deserialize)]
pub struct Source {
    #[arg(long, conflicts_with_all = ["input", "mask", "sens"])]
    pub manifest: Option<PathBuf>,
    /// Multi-coil LR k-space grid.
    #[arg(long, requires_all = ["mask", "sens"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// HR coil maps grid.
    #[arg(long)]
    pub sens: Option<PathBuf>,
    #[arg(long)]
    pub hr_dims: Option<Dims>,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct ReconArgs {
    #[arg(long, value_enum)]
    pub method: ReconMethod,
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 0.001)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = ProxArg::Haar)]
    pub prox: ProxArg,
    #[arg(long, default_value_t = 3)]
    pub haar_levels: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = 32)]
    pub channels: usize,
    #[arg(long, default_value = "3,3")]
    pub kernel: Dims,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    /// Stop after this many generator updates.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long)]
    pub lr_disc: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub decay: f64,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub adv: OnOff,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100.0)]
    pub eta_gan: f64,
    #[arg(long, default_value_t = 1)]
    pub ndisc: usize,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Score the magnitude image in the critic.
    #[arg(long)]
    pub magnitude_critic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct InferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding one grid per test record, named by record id.
    #[arg(long)]
    pub outputs: PathBuf,
    /// JSON report path; a plain-text table is written next to it.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value = "output")]
    pub method: String,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint for the learned strategy.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Acceleration of the HR mask used by the direct HR strategy;
    /// defaults to the equivalent acceleration of the dataset mask.
    #[arg(long)]
    pub hr_af: Option<f64>,
    #[arg(long)]
    pub hr_center: Option<Dims>,
    #[arg(long, default_value_t = 0.001)]
    pub tau: f64,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = ProxArg::Haar)]
    pub prox: ProxArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub run_json: PathBuf,
    /// Replaces the output location recorded in the run.
    #[arg(long)]
    pub out: PathBuf,
}
