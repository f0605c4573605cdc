//! Simulated annealing over a stacked factor matrix with Levy-flight or
//! Gaussian proposal moves.
//!
//! Each iteration perturbs the candidate state with one independent step per
//! entry (`entry += step_size * draw`), scores it by train RMSE, applies the
//! Metropolis rule `exp(-delta/T) > r` for cost-worsening moves, tracks the
//! best state seen, and cools the temperature.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval;
use crate::model::{FactorModel, ModelError, RatingDataset};
use crate::report::SolverReport;
use crate::sampling::{self, StreamId, WalkKind};

#[derive(Debug, Error, PartialEq)]
pub enum AnnealError {
    #[error("temperatures must satisfy 0 < tf < t0 (got t0 = {t0}, tf = {tf})")]
    InvalidTemperatures { t0: f64, tf: f64 },
    #[error("step size must be finite and non-negative (got {0})")]
    InvalidStepSize(f64),
    #[error("linear cooling rate must be positive (got {0})")]
    InvalidCoolingRate(f64),
    #[error("exponential cooling ratio must lie in (0, 1) (got {0})")]
    InvalidCoolingRatio(f64),
    #[error("config rank {config} does not match model rank {model}")]
    RankMismatch { config: usize, model: usize },
    #[error("acceptance temperature must be positive (got {0})")]
    NonPositiveTemperature(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Temperature schedule: linear `T0 - beta * t` or exponential `T0 * ratio^t`,
/// both floored at the final temperature.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Cooling {
    Linear { beta: f64 },
    Exponential { ratio: f64 },
}

impl Cooling {
    /// Exponential ratio that reaches `tf` exactly at `max_iters`.
    pub fn exponential_to_floor(t0: f64, tf: f64, max_iters: u64) -> Self {
        let ratio = if max_iters == 0 { 0.5 } else { (tf / t0).powf(1.0 / max_iters as f64) };
        Cooling::Exponential { ratio }
    }

    /// Linear rate that reaches `tf` exactly at `max_iters`.
    pub fn linear_to_floor(t0: f64, tf: f64, max_iters: u64) -> Self {
        let beta = if max_iters == 0 { t0 - tf } else { (t0 - tf) / max_iters as f64 };
        Cooling::Linear { beta }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cooling::Linear { .. } => "linear",
            Cooling::Exponential { .. } => "exp",
        }
    }
}

/// Which entries one proposal perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum MoveScope {
    /// Every entry of the stacked matrix receives an independent step.
    #[default]
    FullMatrix,
    /// A single uniformly chosen row receives steps (experimental mode).
    SingleRow,
}

/// Annealing hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AnnealConfig {
    pub t0: f64,
    pub tf: f64,
    pub max_iters: u64,
    pub step_size: f64,
    pub walk: WalkKind,
    pub cooling: Cooling,
    pub rank: usize,
    pub seed: u64,
    pub move_scope: MoveScope,
}

impl Default for AnnealConfig {
    /// Stock configuration: 10 iterations, rank 20, step size 0.01, cooling
    /// from 25000 down to 2.5 (exponential, reaching the floor at the final
    /// iteration), Levy walk with index 1.5.
    fn default() -> Self {
        let (t0, tf, max_iters) = (25_000.0, 2.5, 10);
        Self {
            t0,
            tf,
            max_iters,
            step_size: 0.01,
            walk: WalkKind::default(),
            cooling: Cooling::exponential_to_floor(t0, tf, max_iters),
            rank: 20,
            seed: 0,
            move_scope: MoveScope::FullMatrix,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), AnnealError> {
        if !(self.t0 > 0.0 && self.tf > 0.0 && self.tf < self.t0) {
            return Err(AnnealError::InvalidTemperatures { t0: self.t0, tf: self.tf });
        }
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(AnnealError::InvalidStepSize(self.step_size));
        }
        match self.cooling {
            Cooling::Linear { beta } => {
                if !(beta > 0.0) {
                    return Err(AnnealError::InvalidCoolingRate(beta));
                }
            }
            Cooling::Exponential { ratio } => {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(AnnealError::InvalidCoolingRatio(ratio));
                }
            }
        }
        Ok(())
    }

    pub fn solver_name(&self) -> &'static str {
        match self.walk {
            WalkKind::Levy(_) => "sa-levy",
            WalkKind::Gaussian { .. } => "sa-gaussian",
        }
    }
}

/// Temperature at iteration `t`, never below the final temperature.
pub fn cool(config: &AnnealConfig, t: u64) -> f64 {
    let raw = match config.cooling {
        Cooling::Linear { beta } => config.t0 - beta * t as f64,
        Cooling::Exponential { ratio } => config.t0 * ratio.powf(t as f64),
    };
    raw.max(config.tf)
}

/// Proposal move: a fresh model where the configured scope of entries gets
/// `entry += step_size * draw`. The input model is left untouched.
pub fn propose<R: Rng>(
    current: &FactorModel,
    step_size: f64,
    walk: &WalkKind,
    scope: MoveScope,
    rng: &mut R,
) -> FactorModel {
    let mut out = current.clone();
    perturb_in_place(&mut out, step_size, walk, scope, rng);
    out
}

fn perturb_in_place<R: Rng>(
    model: &mut FactorModel,
    step_size: f64,
    walk: &WalkKind,
    scope: MoveScope,
    rng: &mut R,
) {
    match scope {
        MoveScope::FullMatrix => {
            for x in model.stacked_mut() {
                *x += step_size * walk.step(rng);
            }
        }
        MoveScope::SingleRow => {
            let rows = model.num_users() + model.num_items();
            let row = rng.random_range(0..rows);
            let k = model.rank();
            for x in &mut model.stacked_mut()[row * k..(row + 1) * k] {
                *x += step_size * walk.step(rng);
            }
        }
    }
}

/// Metropolis acceptance: improvements always pass; a worsening move passes
/// when `exp(-delta_f / temperature)` strictly exceeds one uniform draw.
pub fn accept<R: Rng>(delta_f: f64, temperature: f64, rng: &mut R) -> Result<bool, AnnealError> {
    if !(temperature > 0.0) {
        return Err(AnnealError::NonPositiveTemperature(temperature));
    }
    Ok(accept_unchecked(delta_f, temperature, rng))
}

#[inline]
fn accept_unchecked<R: Rng>(delta_f: f64, temperature: f64, rng: &mut R) -> bool {
    if delta_f <= 0.0 {
        return true;
    }
    let p = (-delta_f / temperature).exp();
    let r: f64 = rng.random();
    p > r
}

/// Runs the annealing loop on the training ratings and returns the best model
/// seen together with the run report.
///
/// The loop is sequential (each step depends on the previous state); the RMSE
/// evaluation inside a step uses the crate-wide deterministic reduction, so
/// results are identical with and without the `parallel` feature.
pub fn anneal(
    train: &RatingDataset,
    config: &AnnealConfig,
    initial: &FactorModel,
) -> Result<(FactorModel, SolverReport), AnnealError> {
    config.validate()?;
    initial.check_shape(train)?;
    if initial.rank() != config.rank {
        return Err(AnnealError::RankMismatch { config: config.rank, model: initial.rank() });
    }

    let started = Instant::now();
    let mut rng: ChaCha8Rng = sampling::stream(config.seed, StreamId::Walk);

    let mut current = initial.clone();
    let mut current_cost = eval::rmse(&current.predictor(), train);
    let mut best = current.clone();
    let mut best_cost = current_cost;

    let mut report = SolverReport::new(config.solver_name());
    let mut candidate = current.clone();

    let mut t: u64 = 0;
    while t < config.max_iters {
        let temperature = cool(config, t);
        if temperature <= config.tf && t > 0 {
            break;
        }

        candidate.stacked_mut().copy_from_slice(current.stacked());
        perturb_in_place(&mut candidate, config.step_size, &config.walk, config.move_scope, &mut rng);
        let candidate_cost = eval::rmse(&candidate.predictor(), train);
        let delta = candidate_cost - current_cost;

        if accept_unchecked(delta, temperature, &mut rng) {
            std::mem::swap(&mut current, &mut candidate);
            current_cost = candidate_cost;
            if current_cost < best_cost {
                best.stacked_mut().copy_from_slice(current.stacked());
                best_cost = current_cost;
            }
        }

        report.objective_trace.push(current_cost);
        report.best_trace.push(best_cost);
        t += 1;
    }

    report.iterations = t;
    report.final_train_rmse = best_cost;
    report.wall_ms = started.elapsed().as_millis() as u64;
    Ok((best, report))
}
