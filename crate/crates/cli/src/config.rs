//! Command-line flags merged over an optional TOML file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "mixorder", version, about = "Select the order and the number of clusters of Gaussian mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum-likelihood (or Lcc / message-length) fits over a range of G.
    Fit(FitArgs),
    /// AIC, BIC, AIC3, ICLbic, Lcc-ICL and slope heuristics over a range of G.
    Criteria(CommonArgs),
    /// Gibbs chains per G, stored draws and DIC.
    Gibbs(GibbsArgs),
    /// Marginal likelihoods and posterior odds over G.
    Marglik(MarglikArgs),
    /// Sparse overfitted mixture: posterior of the number of clusters.
    Sparse(SparseArgs),
    /// Parametric bootstrap likelihood ratio test.
    BootstrapLrt(LrtArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Headerless CSV, one observation per row.
    #[arg(long, conflicts_with = "dataset")]
    pub data: Option<PathBuf>,
    /// Bundled dataset: galaxy, faithful (alias geyser), enzyme, acidity.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub gmin: Option<usize>,
    #[arg(long)]
    pub gmax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the long flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// EM restarts per fit.
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Em,
    Bem,
    Mml,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub method: Option<FitMethod>,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Fixed symmetric Dirichlet concentration e0.
    #[arg(long)]
    pub e0: Option<f64>,
    /// Conjugate prior μ | σ² ~ N(m, σ²/κ) with this κ.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Fix C0 instead of the Gamma hyperprior.
    #[arg(long)]
    pub c0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GibbsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Disable random permutation moves.
    #[arg(long)]
    pub no_permute: bool,
    /// Relabel the draws by k-means on the component parameters.
    #[arg(long)]
    pub resolve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GPriorArg {
    Poisson,
    Uniform,
}

#[derive(Debug, Args)]
pub struct MarglikArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Stored sweeps per fully symmetric density.
    #[arg(long)]
    pub s0: Option<usize>,
    /// Draws from each importance density (default: the chain length).
    #[arg(long)]
    pub l: Option<usize>,
    /// Bridge-sampling tolerance on the log scale.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub g_prior: Option<GPriorArg>,
}

#[derive(Debug, Args)]
pub struct SparseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Overfitted number of components.
    #[arg(long)]
    pub g: Option<usize>,
    /// Gamma hyperprior on e0 (ignored when --e0 is given).
    #[arg(long)]
    pub e0_shape: Option<f64>,
    #[arg(long)]
    pub e0_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LrtArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub g0: Option<usize>,
    #[arg(long)]
    pub g1: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// Every setting, as read from a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub dataset: Option<String>,
    pub gmin: Option<usize>,
    pub gmax: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub restarts: Option<usize>,
    pub method: Option<FitMethod>,
    pub draws: Option<usize>,
    pub burn_in: Option<usize>,
    pub e0: Option<f64>,
    pub kappa: Option<f64>,
    pub c0: Option<f64>,
    pub permute: Option<bool>,
    pub resolve: Option<bool>,
    pub s0: Option<usize>,
    pub l: Option<usize>,
    pub tol: Option<f64>,
    pub g_prior: Option<GPriorArg>,
    pub g: Option<usize>,
    pub e0_shape: Option<f64>,
    pub e0_rate: Option<f64>,
    pub g0: Option<usize>,
    pub g1: Option<usize>,
    pub b: Option<usize>,
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub enum Source {
    File(PathBuf),
    Bundled(String),
}

/// Resolved settings shared by every command.
pub struct Common {
    pub source: Source,
    pub gmin: usize,
    pub gmax: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub restarts: usize,
}

impl Common {
    pub fn resolve(args: &CommonArgs, file: &FileConfig, default_range: (usize, usize)) -> Result<Common> {
        let source = match (&args.data, &args.dataset) {
            (Some(p), _) => Source::File(p.clone()),
            (None, Some(n)) => Source::Bundled(n.clone()),
            (None, None) => match (&file.data, &file.dataset) {
                (Some(p), _) => Source::File(p.clone()),
                (None, Some(n)) => Source::Bundled(n.clone()),
                (None, None) => bail!("no input: pass --data <csv> or --dataset <name>"),
            },
        };
        let gmin = args.gmin.or(file.gmin).unwrap_or(default_range.0);
        let gmax = args.gmax.or(file.gmax).unwrap_or(default_range.1.max(gmin));
        if gmin == 0 || gmin > gmax {
            bail!("empty G range {gmin}..={gmax}");
        }
        Ok(Common {
            source,
            gmin,
            gmax,
            seed: args.seed.or(file.seed).unwrap_or(1),
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("mixorder-out")),
            restarts: args.restarts.or(file.restarts).unwrap_or(10),
        })
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.gmin..=self.gmax
    }
}

pub struct Chain {
    pub draws: usize,
    pub burn_in: usize,
    pub e0: Option<f64>,
    pub kappa: Option<f64>,
    pub c0: Option<f64>,
}

impl Chain {
    pub fn resolve(args: &ChainArgs, file: &FileConfig) -> Chain {
        Chain {
            draws: args.draws.or(file.draws).unwrap_or(12_000),
            burn_in: args.burn_in.or(file.burn_in).unwrap_or(2_000),
            e0: args.e0.or(file.e0),
            kappa: args.kappa.or(file.kappa),
            c0: args.c0.or(file.c0),
        }
    }
}
