//! Biased stochastic gradient descent baseline.
//!
//! For each training triple the error `e = r - mu - b_m - b_n - u_m . i_n`
//! is computed once from pre-update values, then all four parameter groups
//! (both biases, the user row, the item row) step along their gradients. By
//! default every update uses the pre-step values, making the step a true
//! gradient step; the classic sequential in-place variant is available via
//! [`SgdUpdateMode::InPlace`].

use std::time::Instant;

use thiserror::Error;

use crate::eval;
use crate::model::{BiasedFactorModel, FactorModel, ModelError, RatingDataset, RatingTriple};
use crate::report::SolverReport;
use crate::sampling::{self, StreamId};

#[derive(Debug, Error, PartialEq)]
pub enum SgdError {
    #[error("learning rate must be positive and finite (got {0})")]
    InvalidLearningRate(f64),
    #[error("regularization must be non-negative and finite (got {0})")]
    InvalidRegularization(f64),
    #[error("run diverged at rating ({user}, {item}): non-finite error")]
    Divergence { user: usize, item: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Whether a step applies all four updates from pre-step values or
/// sequentially in place (item update seeing the fresh user row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum SgdUpdateMode {
    #[default]
    Simultaneous,
    InPlace,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: u32,
    pub rank: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub init_lower: f64,
    pub init_upper: f64,
    pub update_mode: SgdUpdateMode,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            regularization: 0.02,
            epochs: 30,
            rank: 20,
            seed: 0,
            shuffle: true,
            init_lower: 0.0,
            init_upper: 1.0,
            update_mode: SgdUpdateMode::Simultaneous,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<(), SgdError> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(SgdError::InvalidLearningRate(self.learning_rate));
        }
        if self.regularization < 0.0 || !self.regularization.is_finite() {
            return Err(SgdError::InvalidRegularization(self.regularization));
        }
        Ok(())
    }
}

/// One gradient step on a single rating. Mutates the model in place.
pub fn sgd_step(
    model: &mut BiasedFactorModel,
    triple: &RatingTriple,
    cfg: &SgdConfig,
) -> Result<(), SgdError> {
    let (user, item) = (triple.user, triple.item);
    if user >= model.base.num_users() || item >= model.base.num_items() {
        return Err(SgdError::Model(ModelError::IndexOutOfRange {
            user,
            item,
            users: model.base.num_users(),
            items: model.base.num_items(),
        }));
    }
    step_unchecked(model, triple, cfg)
}

/// Full training run: mean-centered biases start at zero, factors start
/// uniform, then `epochs` passes over the training triples (seed-shuffled per
/// epoch when configured). The trace holds train RMSE after each epoch.
pub fn sgd_train(
    train: &RatingDataset,
    cfg: &SgdConfig,
) -> Result<(BiasedFactorModel, SolverReport), SgdError> {
    cfg.validate()?;
    let started = Instant::now();
    let base = FactorModel::init_uniform(
        train.num_users(),
        train.num_items(),
        cfg.rank,
        cfg.seed,
        cfg.init_lower,
        cfg.init_upper,
    )?;
    let mut model = BiasedFactorModel::new(base, train.mean_rating());
    let mut report = SolverReport::new("sgd");

    let mut order: Vec<u32> = (0..train.len() as u32).collect();
    let mut rng = sampling::stream(cfg.seed, StreamId::Shuffle);

    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            shuffle(&mut order, &mut rng);
        }
        for &idx in &order {
            let triple = train.triples()[idx as usize];
            step_unchecked(&mut model, &triple, cfg)?;
        }
        report.objective_trace.push(eval::rmse(&model.predictor(), train));
    }

    report.iterations = cfg.epochs as u64;
    report.final_train_rmse = if cfg.epochs == 0 {
        eval::rmse(&model.predictor(), train)
    } else {
        *report.objective_trace.last().unwrap()
    };
    report.wall_ms = started.elapsed().as_millis() as u64;
    Ok((model, report))
}

/// Step on a triple already validated against the model's dimensions.
fn step_unchecked(
    model: &mut BiasedFactorModel,
    triple: &RatingTriple,
    cfg: &SgdConfig,
) -> Result<(), SgdError> {
    let e = triple.rating - model.score(triple.user, triple.item);
    if !e.is_finite() {
        return Err(SgdError::Divergence { user: triple.user, item: triple.item });
    }
    apply_updates(model, triple, e, cfg);
    Ok(())
}

fn apply_updates(model: &mut BiasedFactorModel, triple: &RatingTriple, e: f64, cfg: &SgdConfig) {
    let gamma = cfg.learning_rate;
    let lambda = cfg.regularization;
    let b_m = model.user_bias[triple.user];
    let b_n = model.item_bias[triple.item];
    model.user_bias[triple.user] = b_m + gamma * (e - lambda * b_m);
    model.item_bias[triple.item] = b_n + gamma * (e - lambda * b_n);
    let (u_row, i_row) = model.base.user_item_rows_mut(triple.user, triple.item);
    match cfg.update_mode {
        SgdUpdateMode::Simultaneous => {
            for (u, i) in u_row.iter_mut().zip(i_row.iter_mut()) {
                let (u0, i0) = (*u, *i);
                *u = u0 + gamma * (e * i0 - lambda * u0);
                *i = i0 + gamma * (e * u0 - lambda * i0);
            }
        }
        SgdUpdateMode::InPlace => {
            for (u, i) in u_row.iter_mut().zip(i_row.iter_mut()) {
                *u += gamma * (e * *i - lambda * *u);
                *i += gamma * (e * *u - lambda * *i);
            }
        }
    }
}

fn shuffle<R: rand::Rng>(order: &mut [u32], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingTriple;
    use rand::Rng;

    fn biased_model(mu: f64, u: &[f64], i: &[f64]) -> BiasedFactorModel {
        let mut stacked = u.to_vec();
        stacked.extend_from_slice(i);
        let base = FactorModel::from_stacked(1, 1, u.len(), stacked).unwrap();
        BiasedFactorModel::new(base, mu)
    }

    #[test]
    fn sgd_step_hand_oracle() {
        // r=5, mu=3, zero biases, u=[1,0], i=[1,1], gamma=0.1, lambda=0:
        // e = 1; b_m -> 0.1, b_n -> 0.1, u -> [1.1, 0.1], i -> [1.1, 1.0].
        let mut m = biased_model(3.0, &[1.0, 0.0], &[1.0, 1.0]);
        let cfg = SgdConfig {
            learning_rate: 0.1,
            regularization: 0.0,
            ..SgdConfig::default()
        };
        sgd_step(&mut m, &RatingTriple::new(0, 0, 5.0), &cfg).unwrap();
        assert!((m.user_bias[0] - 0.1).abs() < 1e-12);
        assert!((m.item_bias[0] - 0.1).abs() < 1e-12);
        let u = m.base.user_row(0);
        let i = m.base.item_row(0);
        assert!((u[0] - 1.1).abs() < 1e-12 && (u[1] - 0.1).abs() < 1e-12);
        assert!((i[0] - 1.1).abs() < 1e-12 && (i[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_zero_error_is_fixed_point() {
        let mut m = biased_model(3.0, &[1.0, 0.5], &[0.5, 1.0]);
        let rating = m.predict(0, 0).unwrap();
        let before = m.clone();
        let cfg = SgdConfig {
            learning_rate: 0.1,
            regularization: 0.0,
            ..SgdConfig::default()
        };
        sgd_step(&mut m, &RatingTriple::new(0, 0, rating), &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn sgd_step_rejects_out_of_range_triple() {
        let mut m = biased_model(0.0, &[1.0], &[1.0]);
        let cfg = SgdConfig::default();
        assert!(sgd_step(&mut m, &RatingTriple::new(1, 0, 1.0), &cfg).is_err());
    }

    #[test]
    fn sgd_step_reports_divergence() {
        let mut m = biased_model(0.0, &[f64::INFINITY], &[1.0]);
        let cfg = SgdConfig::default();
        assert!(matches!(
            sgd_step(&mut m, &RatingTriple::new(0, 0, 1.0), &cfg),
            Err(SgdError::Divergence { user: 0, item: 0 })
        ));
    }

    #[test]
    fn sgd_step_decreases_squared_error_below_stability_bound() {
        // For lambda = 0 and gamma below 1 / (|u|^2 + |i|^2 + 2) one step must
        // strictly shrink the squared error on that triple.
        let mut rng = sampling::stream(55, StreamId::Walk);
        for _ in 0..200 {
            let k = 1 + (rng.random::<u32>() % 4) as usize;
            let u: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let i: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut m = biased_model(rng.random_range(-1.0..1.0), &u, &i);
            let rating = rng.random_range(-2.0..2.0);
            let e0 = rating - m.predict(0, 0).unwrap();
            if e0.abs() < 1e-9 {
                continue;
            }
            let norms: f64 = u.iter().chain(&i).map(|x| x * x).sum();
            let cfg = SgdConfig {
                learning_rate: 0.5 / (norms + 2.0),
                regularization: 0.0,
                ..SgdConfig::default()
            };
            sgd_step(&mut m, &RatingTriple::new(0, 0, rating), &cfg).unwrap();
            let e1 = rating - m.predict(0, 0).unwrap();
            assert!(e1 * e1 < e0 * e0, "squared error grew: {e0} -> {e1}");
        }
    }

    #[test]
    fn sgd_train_zero_epochs_keeps_initial_model() {
        let train = RatingDataset::new(
            2,
            2,
            vec![RatingTriple::new(0, 0, 4.0), RatingTriple::new(1, 1, 2.0)],
        )
        .unwrap();
        let cfg = SgdConfig { epochs: 0, rank: 2, ..SgdConfig::default() };
        let (model, report) = sgd_train(&train, &cfg).unwrap();
        assert!(report.objective_trace.is_empty());
        let init = FactorModel::init_uniform(2, 2, 2, cfg.seed, 0.0, 1.0).unwrap();
        assert_eq!(model.base.stacked(), init.stacked());
        assert!(model.user_bias.iter().all(|&b| b == 0.0));
        assert!((model.mu - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sgd_train_fits_single_rating_exactly() {
        let train = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, 4.0)]).unwrap();
        let cfg = SgdConfig {
            learning_rate: 0.1,
            regularization: 0.0,
            epochs: 500,
            rank: 1,
            ..SgdConfig::default()
        };
        let (_, report) = sgd_train(&train, &cfg).unwrap();
        assert!(report.final_train_rmse < 1e-3, "rmse {}", report.final_train_rmse);
    }

    #[test]
    fn sgd_train_fixed_seed_identical_traces() {
        let mut triples = Vec::new();
        for u in 0..6 {
            for i in 0..5 {
                triples.push(RatingTriple::new(u, i, 1.0 + ((u + i) % 5) as f64));
            }
        }
        let train = RatingDataset::new(6, 5, triples).unwrap();
        let cfg = SgdConfig { epochs: 5, rank: 3, ..SgdConfig::default() };
        let (m1, r1) = sgd_train(&train, &cfg).unwrap();
        let (m2, r2) = sgd_train(&train, &cfg).unwrap();
        assert_eq!(r1.objective_trace, r2.objective_trace);
        assert_eq!(m1.base.stacked(), m2.base.stacked());
        assert_eq!(m1.user_bias, m2.user_bias);
    }

    #[test]
    fn sgd_config_validation() {
        let train = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, 4.0)]).unwrap();
        let bad = SgdConfig { learning_rate: 0.0, ..SgdConfig::default() };
        assert!(matches!(sgd_train(&train, &bad), Err(SgdError::InvalidLearningRate(_))));
        let bad = SgdConfig { regularization: -0.1, ..SgdConfig::default() };
        assert!(matches!(sgd_train(&train, &bad), Err(SgdError::InvalidRegularization(_))));
    }
}
