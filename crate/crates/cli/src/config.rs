//! Subcommand parameters. Each struct doubles as the JSON config for its
//! subcommand, so a run can be replayed from its run manifest.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Reproject an equirectangular panorama to a stereographic image.
    Reproject(ReprojectArgs),
    /// Crop each record's unit area, keeping every object whole.
    Crop(CropArgs),
    /// Rotate, flip, divide and align a dataset into training quadrants.
    Augment(AugmentArgs),
    /// Render a density map per image.
    Densify(DensifyArgs),
    /// Render the synthetic disk sweep and audit the kernel scale.
    Synth(SynthArgs),
    /// Tissot indicatrices for the stereographic and equirectangular maps.
    Tissot(TissotArgs),
    /// Score predicted counts against a manifest.
    Eval(EvalArgs),
    /// Map counts to discrete classes.
    Discretize(DiscretizeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Reproject(_) => "reproject",
            Command::Crop(_) => "crop",
            Command::Augment(_) => "augment",
            Command::Densify(_) => "densify",
            Command::Synth(_) => "synth",
            Command::Tissot(_) => "tissot",
            Command::Eval(_) => "eval",
            Command::Discretize(_) => "discretize",
        }
    }

    pub fn out_mut(&mut self) -> &mut Option<PathBuf> {
        match self {
            Command::Reproject(a) => &mut a.out,
            Command::Crop(a) => &mut a.out,
            Command::Augment(a) => &mut a.out,
            Command::Densify(a) => &mut a.out,
            Command::Synth(a) => &mut a.out,
            Command::Tissot(a) => &mut a.out,
            Command::Eval(a) => &mut a.out,
            Command::Discretize(a) => &mut a.out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReprojectArgs {
    /// Equirectangular image (2:1).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record id; also the output file stem. Defaults to the input stem.
    #[arg(long)]
    pub id: Option<String>,
    /// Output side length in pixels.
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Distance from the sphere center to the image plane (>= 1).
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Plane distance covered by half the output side.
    #[arg(long, default_value_t = omnidensity::geom::DEFAULT_PLANE_RADIUS)]
    pub plane_radius: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub roll: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pitch: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub yaw: f64,
    /// Orientation sidecar JSON; overrides --roll/--pitch/--yaw.
    #[arg(long)]
    pub rotation: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Interp::Bilinear)]
    pub interp: Interp,
    /// JSON list of `{"lon": .., "lat": ..}` object directions (radians).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CropArgs {
    /// Dataset manifest; record sources are resolved against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random rotations per flip state (the unrotated variant is always kept).
    #[arg(long, default_value_t = 2)]
    pub rotations: usize,
    /// Also emit horizontally flipped variants.
    #[arg(long)]
    pub flip: bool,
    /// Flip after rotating instead of before.
    #[arg(long)]
    pub flip_after: bool,
    /// Split each aligned quadrant into square tiles of this size.
    #[arg(long, requires = "downscale")]
    pub tile_size: Option<usize>,
    /// Resize each aligned quadrant to this side length before tiling.
    #[arg(long)]
    pub downscale: Option<usize>,
    /// Images held in memory at once.
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Fixed,
    GeometryAdaptive,
    DistortionAdaptive,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("source").required(true).args(["manifest", "tiles", "crops"])))]
pub struct DensifyArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Tile manifest written by `augment`.
    #[arg(long)]
    pub tiles: Option<PathBuf>,
    /// Crop manifest written by `crop`.
    #[arg(long)]
    pub crops: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KernelKind::DistortionAdaptive)]
    pub kernel: KernelKind,
    /// Fixed kernel sigma in pixels.
    #[arg(long, default_value_t = omnidensity::density::DEFAULT_FIXED_SIGMA)]
    pub sigma: f64,
    /// Neighbours averaged by the geometry-adaptive kernel.
    #[arg(long, default_value_t = omnidensity::density::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = omnidensity::density::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 12.0)]
    pub sigma_alpha: f64,
    /// Distance normaliser; defaults to half the image width.
    #[arg(long)]
    pub d_norm: Option<f64>,
    #[arg(long, default_value_t = omnidensity::density::DEFAULT_SIGMA_MIN)]
    pub sigma_min: f64,
    /// Defaults to four times --sigma-alpha.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Kernel support radius in sigmas.
    #[arg(long, default_value_t = omnidensity::density::DEFAULT_TRUNCATION)]
    pub truncation: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Scene JSON; defaults to the radial disk sweep.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 12.0)]
    pub sigma_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TissotModes {
    Stereographic,
    Equirectangular,
    Both,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TissotArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Angular radius of each small circle (radians).
    #[arg(long, default_value_t = omnidensity::synth::TISSOT_MAX_EPSILON)]
    pub epsilon: f64,
    /// Grid spacing in degrees.
    #[arg(long, default_value_t = 30.0)]
    pub step_deg: f64,
    #[arg(long, value_enum, default_value_t = TissotModes::Both)]
    pub mode: TissotModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Directory of predicted `<id>.fimg` maps, or a count table
    /// (`id,count` CSV or JSON object).
    #[arg(long, required_unless_present = "row")]
    pub pred: Option<PathBuf>,
    /// Ground-truth manifest.
    #[arg(long)]
    pub gt: PathBuf,
    /// Only score records of this split.
    #[arg(long)]
    pub split: Option<String>,
    /// Ablation row as `LABEL=PATH`; `|` in LABEL separates label columns.
    #[arg(long, conflicts_with = "pred")]
    pub row: Vec<String>,
    /// Comma-separated label column headers for ablation tables.
    #[arg(long, default_value = "Density function,Alignment")]
    pub headers: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("bins").required(true).args(["c_max", "train"])))]
pub struct DiscretizeArgs {
    /// Upper edge of the last finite class.
    #[arg(long)]
    pub c_max: Option<f64>,
    /// Derive the class layout from this manifest's training counts.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Counts to classify.
    #[arg(long = "value", allow_negative_numbers = true)]
    pub values: Vec<f64>,
    /// Count table (`id,count` CSV or JSON object) to classify.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
