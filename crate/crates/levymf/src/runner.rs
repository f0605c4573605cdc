//! Multi-seed orchestration: split, train, evaluate, aggregate.
//!
//! One seed drives one run: the holdout split, the factor initialization, and
//! every solver draw all derive from it on separate streams. Seed runs are
//! independent, so they execute in parallel when the `parallel` feature is on;
//! outcomes are always ordered by the seed list, never by completion.

use serde::Serialize;
use thiserror::Error;

use crate::eval::{self, Split, SplitMode};
use crate::model::{FactorModel, ModelError, RatingDataset};
use crate::report::SolverReport;
use crate::solvers::als::{als_train, AlsConfig, AlsError};
use crate::solvers::anneal::{anneal, AnnealConfig, AnnealError};
use crate::solvers::sgd::{sgd_train, SgdConfig, SgdError};
use crate::solvers::wnmf::{wnmf_train, WnmfConfig, WnmfError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("no seeds supplied")]
    NoSeeds,
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error(transparent)]
    Sgd(#[from] SgdError),
    #[error(transparent)]
    Als(#[from] AlsError),
    #[error(transparent)]
    Wnmf(#[from] WnmfError),
}

/// The solver to run, with its full configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SolverConfig {
    Anneal(AnnealConfig),
    Sgd(SgdConfig),
    Als(AlsConfig),
    Wnmf(WnmfConfig),
}

impl SolverConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SolverConfig::Anneal(cfg) => cfg.solver_name(),
            SolverConfig::Sgd(_) => "sgd",
            SolverConfig::Als(_) => "als",
            SolverConfig::Wnmf(_) => "wnmf",
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            SolverConfig::Anneal(cfg) => cfg.rank,
            SolverConfig::Sgd(cfg) => cfg.rank,
            SolverConfig::Als(cfg) => cfg.rank,
            SolverConfig::Wnmf(cfg) => cfg.rank,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        match &mut cfg {
            SolverConfig::Anneal(c) => c.seed = seed,
            SolverConfig::Sgd(c) => c.seed = seed,
            SolverConfig::Als(c) => c.seed = seed,
            SolverConfig::Wnmf(c) => c.seed = seed,
        }
        cfg
    }
}

/// A full experiment: one solver configuration evaluated over several seeds
/// under per-seed holdout splits.
#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub solver: SolverConfig,
    pub test_fraction: f64,
    pub split_mode: SplitMode,
    pub seeds: Vec<u64>,
    /// Annealing initialization bounds. `None` centers the initial factors so
    /// that initial predictions sit near the training mean
    /// (see [`mean_matched_bounds`]).
    pub sa_init_bounds: Option<(f64, f64)>,
    /// Optional clamp applied to test predictions.
    pub clamp: Option<(f64, f64)>,
}

impl RunSpec {
    pub fn new(solver: SolverConfig, seeds: Vec<u64>) -> Self {
        Self {
            solver,
            test_fraction: 0.2,
            split_mode: SplitMode::Global,
            seeds,
            sa_init_bounds: None,
            clamp: None,
        }
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Test RMSE of the constant train-mean predictor on the same split.
    pub baseline_rmse: f64,
    pub cold_start_test_triples: usize,
    pub report: SolverReport,
}

/// Aggregate over the seed list.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub solver: String,
    pub outcomes: Vec<RunOutcome>,
    pub mean_test_rmse: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub spread_test_rmse: f64,
    pub total_wall_ms: u64,
}

impl RunSummary {
    pub fn median_test_rmse(&self) -> f64 {
        let mut v: Vec<f64> = self.outcomes.iter().map(|o| o.test_rmse).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

/// Annealing budget tuned for the bundled synthetic benchmark
/// (`200 x 150`, true rank 5): single-row moves under a cool, selective
/// temperature schedule, sized so a run finishes in seconds while the walk
/// distribution still matters.
pub fn sa_synthetic_preset(walk: crate::sampling::WalkKind) -> AnnealConfig {
    let (t0, tf, max_iters) = (0.005, 1e-6, 5000);
    AnnealConfig {
        t0,
        tf,
        max_iters,
        step_size: 0.05,
        walk,
        cooling: crate::solvers::anneal::Cooling::exponential_to_floor(t0, tf, max_iters),
        rank: 5,
        seed: 0,
        move_scope: crate::solvers::anneal::MoveScope::SingleRow,
    }
}

/// Uniform initialization bounds that put initial predictions near the
/// training mean: centered on `sqrt(mean / rank)` with a 10% spread.
pub fn mean_matched_bounds(train: &RatingDataset, rank: usize) -> (f64, f64) {
    let mean = train.mean_rating().max(f64::MIN_POSITIVE);
    let c = (mean / rank as f64).sqrt();
    (0.9 * c, 1.1 * c)
}

/// Runs one seed end to end: split, train, evaluate.
pub fn run_one(
    data: &RatingDataset,
    spec: &RunSpec,
    seed: u64,
) -> Result<RunOutcome, RunnerError> {
    let split = eval::split(data, spec.test_fraction, seed, spec.split_mode)?;
    let solver = spec.solver.with_seed(seed);
    let (train_rmse, test_rmse, mut report) = train_and_eval(&split, &solver, spec)?;
    report.final_test_rmse = Some(test_rmse);
    Ok(RunOutcome {
        seed,
        train_rmse,
        test_rmse,
        baseline_rmse: eval::baseline_rmse(&split.train, &split.test),
        cold_start_test_triples: split.cold_start_test_triples,
        report,
    })
}

fn train_and_eval(
    split: &Split,
    solver: &SolverConfig,
    spec: &RunSpec,
) -> Result<(f64, f64, SolverReport), RunnerError> {
    let train = &split.train;
    let test = &split.test;
    let test_rmse = |predict: &(dyn Fn(usize, usize) -> f64 + Sync)| match spec.clamp {
        Some((lo, hi)) => eval::rmse(&|u, i| predict(u, i).clamp(lo, hi), test),
        None => eval::rmse(&|u, i| predict(u, i), test),
    };
    match solver {
        SolverConfig::Anneal(cfg) => {
            let (lower, upper) = spec
                .sa_init_bounds
                .unwrap_or_else(|| mean_matched_bounds(train, cfg.rank));
            let initial = FactorModel::init_uniform(
                train.num_users(),
                train.num_items(),
                cfg.rank,
                cfg.seed,
                lower,
                upper,
            )?;
            let (model, report) = anneal(train, cfg, &initial)?;
            let test = test_rmse(&model.predictor());
            Ok((report.final_train_rmse, test, report))
        }
        SolverConfig::Sgd(cfg) => {
            let (model, report) = sgd_train(train, cfg)?;
            let test = test_rmse(&model.predictor());
            Ok((report.final_train_rmse, test, report))
        }
        SolverConfig::Als(cfg) => {
            let (model, report) = als_train(train, cfg)?;
            let test = test_rmse(&model.predictor());
            Ok((report.final_train_rmse, test, report))
        }
        SolverConfig::Wnmf(cfg) => {
            let (model, report) = wnmf_train(train, cfg)?;
            let test = test_rmse(&model.predictor());
            Ok((report.final_train_rmse, test, report))
        }
    }
}

/// Runs every seed in the spec and aggregates. Seed runs execute in parallel
/// under the `parallel` feature; the outcome order always follows the seed
/// list.
pub fn run_many(data: &RatingDataset, spec: &RunSpec) -> Result<RunSummary, RunnerError> {
    if spec.seeds.is_empty() {
        return Err(RunnerError::NoSeeds);
    }

    #[cfg(feature = "parallel")]
    let outcomes: Vec<RunOutcome> = {
        use rayon::prelude::*;
        spec.seeds
            .par_iter()
            .map(|&seed| run_one(data, spec, seed))
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<RunOutcome> = spec
        .seeds
        .iter()
        .map(|&seed| run_one(data, spec, seed))
        .collect::<Result<Vec<_>, _>>()?;

    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.test_rmse).sum::<f64>() / n;
    let spread = if outcomes.len() > 1 {
        let var =
            outcomes.iter().map(|o| (o.test_rmse - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    Ok(RunSummary {
        solver: spec.solver.name().to_string(),
        total_wall_ms: outcomes.iter().map(|o| o.report.wall_ms).sum(),
        outcomes,
        mean_test_rmse: mean,
        spread_test_rmse: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthetic_dataset, SynthConfig};

    fn small_data() -> RatingDataset {
        synthetic_dataset(&SynthConfig {
            density: 0.5,
            seed: 1,
            ..SynthConfig::new(30, 25, 3, 0.1)
        })
        .unwrap()
    }

    #[test]
    fn outcomes_follow_seed_order_and_reproduce() {
        let data = small_data();
        let spec = RunSpec::new(
            SolverConfig::Als(AlsConfig { rank: 3, sweeps: 3, ..AlsConfig::default() }),
            vec![5, 1, 9],
        );
        let a = run_many(&data, &spec).unwrap();
        let b = run_many(&data, &spec).unwrap();
        assert_eq!(
            a.outcomes.iter().map(|o| o.seed).collect::<Vec<_>>(),
            vec![5, 1, 9]
        );
        assert_eq!(
            a.outcomes.iter().map(|o| o.test_rmse).collect::<Vec<_>>(),
            b.outcomes.iter().map(|o| o.test_rmse).collect::<Vec<_>>()
        );
    }

    #[test]
    fn single_seed_spread_is_zero() {
        let data = small_data();
        let spec = RunSpec::new(
            SolverConfig::Wnmf(WnmfConfig { rank: 3, iterations: 5, ..WnmfConfig::default() }),
            vec![2],
        );
        let summary = run_many(&data, &spec).unwrap();
        assert_eq!(summary.spread_test_rmse, 0.0);
        assert_eq!(summary.outcomes.len(), 1);
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let data = small_data();
        let spec = RunSpec::new(
            SolverConfig::Sgd(SgdConfig { rank: 3, epochs: 1, ..SgdConfig::default() }),
            vec![],
        );
        assert!(matches!(run_many(&data, &spec), Err(RunnerError::NoSeeds)));
    }

    #[test]
    fn median_is_computed_over_outcomes() {
        let data = small_data();
        let spec = RunSpec::new(
            SolverConfig::Als(AlsConfig { rank: 3, sweeps: 2, ..AlsConfig::default() }),
            vec![1, 2, 3],
        );
        let summary = run_many(&data, &spec).unwrap();
        let mut values: Vec<f64> = summary.outcomes.iter().map(|o| o.test_rmse).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(summary.median_test_rmse(), values[1]);
    }
}
