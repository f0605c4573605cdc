//! Flag surface and resolution: command line > config file > per-format
//! defaults. The config file is plain `key=value` text whose keys are the
//! long flag names.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};

use levymf::eval::SplitMode;
use levymf::runner::{sa_synthetic_preset, SolverConfig};
use levymf::sampling::WalkKind;
use levymf::solvers::anneal::{AnnealConfig, Cooling, MoveScope};
use levymf::synth::SynthConfig;
use levymf::{AlsConfig, SgdConfig, WnmfConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Ml1m,
    Ml100k,
    Synthetic,
}

impl DataFormat {
    pub fn name(self) -> &'static str {
        match self {
            DataFormat::Ml1m => "ml1m",
            DataFormat::Ml100k => "ml100k",
            DataFormat::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverName {
    SaLevy,
    SaGaussian,
    Sgd,
    Als,
    Wnmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WalkArg {
    Levy,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoolingArg {
    Linear,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitModeArg {
    Global,
    PerUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MoveScopeArg {
    Full,
    Row,
}

/// Flags shared by `run`, `sweep`, and `bench`. Everything is optional here;
/// concrete values come out of [`resolve`].
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Ratings file (required for ml1m / ml100k formats).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Input format.
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Generate a seeded synthetic dataset: users, items, true rank, noise.
    #[arg(long, num_args = 4, value_names = ["M", "N", "K", "NOISE"])]
    pub synthetic: Option<Vec<String>>,
    /// Fraction of cells rated in the synthetic dataset.
    #[arg(long)]
    pub density: Option<f64>,
    /// Generation seed for the synthetic dataset.
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Solver to run.
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    /// Comma-separated run seeds; one split + one training run per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Holdout fraction in (0, 1).
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Holdout assignment: one global shuffle or per-user stratified.
    #[arg(long, value_enum)]
    pub split_mode: Option<SplitModeArg>,
    /// Annealing iterations / WNMF rounds.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Number of latent features.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Random-walk step size.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Initial temperature.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Final temperature.
    #[arg(long)]
    pub tf: Option<f64>,
    /// Cooling schedule.
    #[arg(long, value_enum)]
    pub cooling: Option<CoolingArg>,
    /// Linear cooling rate (default: reach tf at the final iteration).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Proposal step distribution (overrides the one implied by --solver).
    #[arg(long, value_enum)]
    pub walk: Option<WalkArg>,
    /// Levy stability index in (0, 2].
    #[arg(long)]
    pub levy_index: Option<f64>,
    /// Standard deviation of the Gaussian walk.
    #[arg(long)]
    pub gauss_std: Option<f64>,
    /// Perturb the whole matrix or a single row per proposal.
    #[arg(long, value_enum)]
    pub move_scope: Option<MoveScopeArg>,
    /// SGD learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Regularization (SGD and ALS).
    #[arg(long)]
    pub reg: Option<f64>,
    /// SGD epochs.
    #[arg(long)]
    pub epochs: Option<u32>,
    /// ALS sweeps.
    #[arg(long)]
    pub sweeps: Option<u32>,
    /// WNMF denominator floor.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Factor initialization lower bound.
    #[arg(long)]
    pub init_lower: Option<f64>,
    /// Factor initialization upper bound.
    #[arg(long)]
    pub init_upper: Option<f64>,
    /// Clamp test predictions to LO,HI (off by default).
    #[arg(long, value_delimiter = ',', num_args = 2, value_names = ["LO", "HI"])]
    pub clamp: Option<Vec<f64>>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record measured wall-clock times in the CSV (breaks byte-for-byte
    /// reproducibility of the output; timings always go to stderr).
    #[arg(long)]
    pub timings: bool,
    /// key=value file supplying any flag; command line takes precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Values from a `key=value` config file.
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self { values: HashMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = HashMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), no + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("config key {key}: cannot parse {raw:?}")),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

fn pick<T: FromStr>(cli: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>> {
    match cli {
        Some(v) => Ok(Some(v)),
        None => file.parsed(key),
    }
}

/// Where the ratings come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    File { path: PathBuf, format: DataFormat },
    Synthetic(SynthConfig),
}

impl DataSource {
    pub fn format_name(&self) -> &'static str {
        match self {
            DataSource::File { format, .. } => format.name(),
            DataSource::Synthetic(_) => "synthetic",
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, DataSource::Synthetic(_))
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub source: DataSource,
    pub solver: SolverConfig,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub split_mode: SplitMode,
    /// Annealing initialization override; `None` means mean-matched.
    pub sa_init_bounds: Option<(f64, f64)>,
    pub clamp: Option<(f64, f64)>,
    pub out: PathBuf,
    pub timings: bool,
}

pub fn resolve(args: &CommonArgs, default_out: &str) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    let source = resolve_source(args, &file)?;
    let solver_name = pick(args.solver, &file, "solver")?.unwrap_or(SolverName::SaLevy);
    let solver = resolve_solver(args, &file, solver_name, &source)?;

    let seeds = match (&args.seeds, file.get("seeds")) {
        (Some(s), _) if !s.is_empty() => s.clone(),
        (_, Some(raw)) => raw
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| anyhow!("bad seed {s:?}")))
            .collect::<Result<Vec<u64>>>()?,
        _ => vec![1, 2, 3],
    };
    if seeds.is_empty() {
        bail!("--seeds must name at least one seed");
    }

    let sa_init_bounds = match (
        pick(args.init_lower, &file, "init-lower")?,
        pick(args.init_upper, &file, "init-upper")?,
    ) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => bail!("--init-lower and --init-upper must be given together"),
    };

    let clamp = match (&args.clamp, file.get("clamp")) {
        (Some(v), _) if v.len() == 2 => Some((v[0], v[1])),
        (Some(_), _) => bail!("--clamp takes exactly LO,HI"),
        (None, Some(raw)) => {
            let parts: Vec<f64> = raw
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| anyhow!("bad clamp bound {s:?}")))
                .collect::<Result<Vec<f64>>>()?;
            if parts.len() != 2 {
                bail!("clamp takes exactly LO,HI");
            }
            Some((parts[0], parts[1]))
        }
        (None, None) => None,
    };

    Ok(Resolved {
        source,
        solver,
        seeds,
        test_fraction: pick(args.test_fraction, &file, "test-fraction")?.unwrap_or(0.2),
        split_mode: match pick(args.split_mode, &file, "split-mode")?.unwrap_or(SplitModeArg::Global)
        {
            SplitModeArg::Global => SplitMode::Global,
            SplitModeArg::PerUser => SplitMode::PerUser,
        },
        sa_init_bounds,
        clamp,
        out: pick(args.out.clone(), &file, "out")?.unwrap_or_else(|| PathBuf::from(default_out)),
        timings: args.timings || file.get("timings") == Some("true"),
    })
}

fn resolve_source(args: &CommonArgs, file: &FileConfig) -> Result<DataSource> {
    let synth_args: Option<Vec<String>> = match &args.synthetic {
        Some(v) => Some(v.clone()),
        None => file
            .get("synthetic")
            .map(|raw| raw.split_whitespace().map(str::to_string).collect()),
    };
    let format = pick(args.format, file, "format")?;

    if let Some(parts) = synth_args {
        if parts.len() != 4 {
            bail!("--synthetic takes exactly M N K NOISE");
        }
        if matches!(format, Some(f) if f != DataFormat::Synthetic) {
            bail!("--synthetic conflicts with --format {}", format.unwrap().name());
        }
        let mut cfg = SynthConfig::new(
            parts[0].parse().context("synthetic M")?,
            parts[1].parse().context("synthetic N")?,
            parts[2].parse().context("synthetic K")?,
            parts[3].parse().context("synthetic NOISE")?,
        );
        cfg.density = pick(args.density, file, "density")?.unwrap_or(0.2);
        cfg.seed = pick(args.synth_seed, file, "synth-seed")?.unwrap_or(0);
        return Ok(DataSource::Synthetic(cfg));
    }

    match format {
        Some(DataFormat::Synthetic) => {
            // Default desk-scale dimensions when only the format is given.
            let mut cfg = SynthConfig::new(200, 150, 5, 0.3);
            cfg.density = pick(args.density, file, "density")?.unwrap_or(0.2);
            cfg.seed = pick(args.synth_seed, file, "synth-seed")?.unwrap_or(0);
            Ok(DataSource::Synthetic(cfg))
        }
        Some(format) => {
            let path = match &args.data {
                Some(p) => p.clone(),
                None => file
                    .get("data")
                    .map(PathBuf::from)
                    .ok_or_else(|| anyhow!("--data is required for --format {}", format.name()))?,
            };
            Ok(DataSource::File { path, format })
        }
        None => bail!("--format is required (ml1m, ml100k, or synthetic)"),
    }
}

/// Default rank: true-rank-sized for the synthetic benchmark, 20 for real
/// datasets.
fn default_rank(source: &DataSource) -> usize {
    match source {
        DataSource::Synthetic(cfg) => cfg.rank,
        DataSource::File { .. } => 20,
    }
}

pub fn resolve_solver(
    args: &CommonArgs,
    file: &FileConfig,
    name: SolverName,
    source: &DataSource,
) -> Result<SolverConfig> {
    let rank = pick(args.rank, file, "rank")?.unwrap_or_else(|| default_rank(source));
    match name {
        SolverName::SaLevy | SolverName::SaGaussian => {
            let walk_arg = pick(args.walk, file, "walk")?.unwrap_or(match name {
                SolverName::SaLevy => WalkArg::Levy,
                _ => WalkArg::Gaussian,
            });
            let walk = match walk_arg {
                WalkArg::Levy => {
                    WalkKind::levy(pick(args.levy_index, file, "levy-index")?.unwrap_or(1.5))?
                }
                WalkArg::Gaussian => {
                    WalkKind::gaussian(pick(args.gauss_std, file, "gauss-std")?.unwrap_or(1.0))?
                }
            };
            // Synthetic runs default to the desk-tuned budget; file-backed
            // runs default to the stock configuration.
            let mut cfg = if source.is_synthetic() {
                sa_synthetic_preset(walk)
            } else {
                AnnealConfig { walk, ..AnnealConfig::default() }
            };
            cfg.rank = rank;
            if let Some(iters) = pick(args.iters, file, "iters")? {
                cfg.max_iters = iters;
            }
            if let Some(step) = pick(args.step_size, file, "step-size")? {
                cfg.step_size = step;
            }
            if let Some(t0) = pick(args.t0, file, "t0")? {
                cfg.t0 = t0;
            }
            if let Some(tf) = pick(args.tf, file, "tf")? {
                cfg.tf = tf;
            }
            cfg.move_scope = match pick(args.move_scope, file, "move-scope")? {
                Some(MoveScopeArg::Full) => MoveScope::FullMatrix,
                Some(MoveScopeArg::Row) => MoveScope::SingleRow,
                None => cfg.move_scope,
            };
            cfg.cooling = match pick(args.cooling, file, "cooling")? {
                Some(CoolingArg::Linear) => match pick(args.beta, file, "beta")? {
                    Some(beta) => Cooling::Linear { beta },
                    None => Cooling::linear_to_floor(cfg.t0, cfg.tf, cfg.max_iters),
                },
                Some(CoolingArg::Exp) | None => {
                    Cooling::exponential_to_floor(cfg.t0, cfg.tf, cfg.max_iters)
                }
            };
            Ok(SolverConfig::Anneal(cfg))
        }
        SolverName::Sgd => {
            let mut cfg = SgdConfig { rank, ..SgdConfig::default() };
            if let Some(lr) = pick(args.lr, file, "lr")? {
                cfg.learning_rate = lr;
            }
            if let Some(reg) = pick(args.reg, file, "reg")? {
                cfg.regularization = reg;
            }
            if let Some(epochs) = pick(args.epochs, file, "epochs")? {
                cfg.epochs = epochs;
            }
            if let Some(lo) = pick(args.init_lower, file, "init-lower")? {
                cfg.init_lower = lo;
            }
            if let Some(hi) = pick(args.init_upper, file, "init-upper")? {
                cfg.init_upper = hi;
            }
            Ok(SolverConfig::Sgd(cfg))
        }
        SolverName::Als => {
            let mut cfg = AlsConfig { rank, ..AlsConfig::default() };
            if let Some(reg) = pick(args.reg, file, "reg")? {
                cfg.regularization = reg;
            }
            if let Some(sweeps) = pick(args.sweeps, file, "sweeps")? {
                cfg.sweeps = sweeps;
            }
            if let Some(lo) = pick(args.init_lower, file, "init-lower")? {
                cfg.init_lower = lo;
            }
            if let Some(hi) = pick(args.init_upper, file, "init-upper")? {
                cfg.init_upper = hi;
            }
            Ok(SolverConfig::Als(cfg))
        }
        SolverName::Wnmf => {
            let mut cfg = WnmfConfig { rank, ..WnmfConfig::default() };
            if let Some(iters) = pick(args.iters, file, "iters")? {
                cfg.iterations = u32::try_from(iters).context("--iters too large for wnmf")?;
            }
            if let Some(eps) = pick(args.epsilon, file, "epsilon")? {
                cfg.epsilon = eps;
            }
            if let Some(lo) = pick(args.init_lower, file, "init-lower")? {
                cfg.init_lower = lo;
            }
            if let Some(hi) = pick(args.init_upper, file, "init-upper")? {
                cfg.init_upper = hi;
            }
            Ok(SolverConfig::Wnmf(cfg))
        }
    }
}

impl FromStr for DataFormat {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml1m" => Ok(DataFormat::Ml1m),
            "ml100k" => Ok(DataFormat::Ml100k),
            "synthetic" => Ok(DataFormat::Synthetic),
            other => Err(anyhow!("unknown format {other:?}")),
        }
    }
}

impl FromStr for SolverName {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa-levy" => Ok(SolverName::SaLevy),
            "sa-gaussian" => Ok(SolverName::SaGaussian),
            "sgd" => Ok(SolverName::Sgd),
            "als" => Ok(SolverName::Als),
            "wnmf" => Ok(SolverName::Wnmf),
            other => Err(anyhow!("unknown solver {other:?}")),
        }
    }
}

impl FromStr for WalkArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levy" => Ok(WalkArg::Levy),
            "gaussian" => Ok(WalkArg::Gaussian),
            other => Err(anyhow!("unknown walk {other:?}")),
        }
    }
}

impl FromStr for CoolingArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(CoolingArg::Linear),
            "exp" => Ok(CoolingArg::Exp),
            other => Err(anyhow!("unknown cooling {other:?}")),
        }
    }
}

impl FromStr for SplitModeArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(SplitModeArg::Global),
            "per-user" => Ok(SplitModeArg::PerUser),
            other => Err(anyhow!("unknown split mode {other:?}")),
        }
    }
}

impl FromStr for MoveScopeArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MoveScopeArg::Full),
            "row" => Ok(MoveScopeArg::Row),
            other => Err(anyhow!("unknown move scope {other:?}")),
        }
    }
}
