use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (interface 1.0)");

#[derive(Debug, Parser)]
#[command(name = "lvggm", version = VERSION, about = "Sparse plus low-rank precision estimation for Gaussian graphical models with latent variables")]
pub struct Cli {
    /// Seed for every random draw; overrides `base_seed` in experiment configs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a ground-truth model and optionally draw samples from it.
    Generate(GenerateArgs),
    /// Fit S + L (or the graphical lasso) to samples or a covariance.
    Estimate(EstimateArgs),
    /// Report Fisher-geometry diagnostics and the error bound for a model.
    Diagnose(DiagnoseArgs),
    /// Run a Monte-Carlo study.
    Experiment(ExperimentArgs),
    /// Scatter plot of a results CSV as SVG plus a .dat file.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionalKind {
    /// Tridiagonal chain.
    Chain,
    /// Random sparse graph, diagonally dominant.
    Random,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Observed dimension.
    #[arg(long)]
    pub p: usize,
    /// Number of latent variables.
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = ConditionalKind::Chain)]
    pub kind: ConditionalKind,
    /// Edge probability for `--kind random`.
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    /// Diagonal of the chain precision.
    #[arg(long, default_value_t = 1.0)]
    pub chain_diag: f64,
    /// Entry scale of the observed-latent coupling.
    #[arg(long, default_value_t = 0.3)]
    pub latent_scale: f64,
    /// Rescale the coupling to this tr(G)/tr(S⁻¹) ratio.
    #[arg(long)]
    pub energy_ratio: Option<f64>,
    /// Number of samples to draw; 0 skips sampling.
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Matrix CSV: p × n samples (one per column), or p × p with --is-covariance.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub is_covariance: bool,
    /// Sample count behind a covariance input; needed for default λ, μ.
    #[arg(long)]
    pub n: Option<usize>,
    /// Subtract row means before forming the covariance.
    #[arg(long)]
    pub center: bool,
    /// ℓ₁ weight; defaults to 0.1·σ̄·√(ln p / n) from the sample.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Nuclear weight; defaults to 0.1·ρ·√(r_eff ln p / n) from the sample.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_abs: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_rel: f64,
    /// Fit the graphical lasso (no low-rank part).
    #[arg(long)]
    pub glasso: bool,
    #[arg(long)]
    pub adaptive_rho: bool,
    /// Output files are `<prefix>S_hat.csv`, `<prefix>L_hat.csv`, ...
    #[arg(long, default_value = "")]
    pub output_prefix: String,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Joint precision CSV over (observed, latent); needs --observed.
    #[arg(long, conflicts_with_all = ["sparse", "lowrank"])]
    pub model: Option<PathBuf>,
    /// Number of observed variables in --model.
    #[arg(long, requires = "model")]
    pub observed: Option<usize>,
    /// Sparse part S* as a matrix CSV.
    #[arg(long, requires = "lowrank")]
    pub sparse: Option<PathBuf>,
    /// Low-rank part L* as a matrix CSV.
    #[arg(long, requires = "sparse")]
    pub lowrank: Option<PathBuf>,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    /// Burn-in constant, must exceed 6.
    #[arg(long = "M", default_value_t = 7.0)]
    pub m_const: f64,
    /// Write the JSON report here instead of stdout (a manifest goes alongside).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    /// Effective rank against energy ratio.
    Effrank,
    /// Frobenius error against rescaled sample size.
    Scaling,
    /// Grid search of the scaling study's Ca, Cb.
    Tune,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub study: StudyKind,
    /// Flat `key = value` config; all keys optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Results file (CSV, or JSON for `tune`).
    #[arg(long)]
    pub output: PathBuf,
    /// Manifest path; defaults to the output path with a `.manifest.json` suffix.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Use the full-size grid (slow).
    #[arg(long)]
    pub full_scale: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Results CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "rescaled_n")]
    pub x: String,
    #[arg(long, default_value = "metric")]
    pub y: String,
    /// Logarithmic axes.
    #[arg(long)]
    pub log: bool,
    /// Overlay a fitted c·x^(-1/2) curve.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub output: PathBuf,
}
