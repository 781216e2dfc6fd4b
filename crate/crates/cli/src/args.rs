use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "uvt",
    version,
    about = "Tomography with unknown view angles and detector shifts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a phantom or image file.
    Simulate(SimulateArgs),
    /// Reconstruct an image and geometry from a dataset.
    Reconstruct(ReconstructArgs),
    /// Align a reconstruction to the truth and append a metrics row.
    Evaluate(EvaluateArgs),
    /// Build the comparison table, convergence plot data and previews.
    Report(ReportArgs),
    /// Run a small end-to-end check.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhantomArg {
    SheppLogan,
    SheppLoganOriginal,
    Asymmetric,
    Disks,
    File,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "shepp-logan")]
    pub phantom: PhantomArg,
    /// Grayscale PNG or PGM, required with `--phantom file`.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Seed of the disk layout for `--phantom disks`.
    #[arg(long, default_value_t = uvt::simulate::PhantomKind::DEFAULT_DISK_SEED)]
    pub disk_seed: u64,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Largest image shift per axis, in pixels.
    #[arg(long, default_value_t = 5)]
    pub m: i32,
    /// Noise level as a fraction of the mean absolute clean sample.
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Dataset file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// blind, ours, oracle or moments.
    #[arg(long)]
    pub method: Option<String>,
    /// Settings file; flags take precedence over it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// median, fixed:<k>, local:<n>:<scale> or selftuning:<n>.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Neighbours kept per projection, or `none` for a dense kernel.
    #[arg(long)]
    pub knn: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub delta_deg: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// rel:<fraction> or abs:<value>.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// none or hann.
    #[arg(long)]
    pub fbp_window: Option<String>,
    /// Dump the iterate every this many iterations.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the similarity matrix and embedding as CSV.
    #[arg(long)]
    pub dump_similarity: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Reconstruction (UVTI).
    #[arg(long)]
    pub image: PathBuf,
    /// Label for the metrics row.
    #[arg(long)]
    pub method: String,
    /// Geometry CSV; adds the mean angle error.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Metrics CSV to append to.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Where to write the aligned image; defaults to `<image>_aligned.uvti`.
    #[arg(long)]
    pub aligned: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub metrics: Vec<PathBuf>,
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Images (UVTI) to export as 16-bit PGM.
    #[arg(long)]
    pub image: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}
