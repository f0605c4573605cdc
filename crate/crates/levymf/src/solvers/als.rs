//! Alternating least squares with ridge normal equations.
//!
//! Each half-sweep fixes one side and solves every row of the other side
//! exactly: the `K x K` normal matrix is accumulated over that row's known
//! ratings only, `lambda * I` is added, and the system is solved by LU
//! factorization. Rows with no training ratings keep their current values.
//! Row solves are independent, so a half-sweep parallelizes without changing
//! any result.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::eval;
use crate::model::{FactorModel, ModelError, RatingDataset};
use crate::report::SolverReport;

#[derive(Debug, Error, PartialEq)]
pub enum AlsError {
    #[error("regularization must be non-negative and finite (got {0})")]
    InvalidRegularization(f64),
    #[error("singular normal system for {side} row {row} (rank-deficient with lambda = 0)")]
    Singular { side: &'static str, row: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which factor block a half-sweep solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Users,
    Items,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Users => "users",
            Side::Items => "items",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AlsConfig {
    pub regularization: f64,
    pub sweeps: u32,
    pub rank: usize,
    pub seed: u64,
    pub init_lower: f64,
    pub init_upper: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            regularization: 0.05,
            sweeps: 15,
            rank: 20,
            seed: 0,
            init_lower: 0.0,
            init_upper: 1.0,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<(), AlsError> {
        if self.regularization < 0.0 || !self.regularization.is_finite() {
            return Err(AlsError::InvalidRegularization(self.regularization));
        }
        Ok(())
    }
}

/// Solves one side of the model with the other held fixed, returning the new
/// rows (row-major, `rows x K`). The input model is not modified.
pub fn als_solve_side(
    train: &RatingDataset,
    model: &FactorModel,
    lambda: f64,
    side: Side,
) -> Result<Vec<f64>, AlsError> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(AlsError::InvalidRegularization(lambda));
    }
    model.check_shape(train)?;
    let k = model.rank();
    let rows = match side {
        Side::Users => train.num_users(),
        Side::Items => train.num_items(),
    };
    let mut out = vec![0.0; rows * k];

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(k)
            .enumerate()
            .map(|(row, dst)| solve_row(train, model, lambda, side, row, dst))
            .collect::<Result<(), AlsError>>()?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (row, dst) in out.chunks_mut(k).enumerate() {
            solve_row(train, model, lambda, side, row, dst)?;
        }
    }
    Ok(out)
}

/// Exact least-squares solve for one row; writes the solution into `dst`.
fn solve_row(
    train: &RatingDataset,
    model: &FactorModel,
    lambda: f64,
    side: Side,
    row: usize,
    dst: &mut [f64],
) -> Result<(), AlsError> {
    let k = model.rank();
    let count = match side {
        Side::Users => train.user_rating_count(row),
        Side::Items => train.item_rating_count(row),
    };
    if count == 0 {
        // Cold row: keep the current values.
        let current = match side {
            Side::Users => model.user_row(row),
            Side::Items => model.item_row(row),
        };
        dst.copy_from_slice(current);
        return Ok(());
    }

    let mut normal = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut accumulate = |fixed: &[f64], rating: f64| {
        for a in 0..k {
            rhs[a] += rating * fixed[a];
            for b in 0..k {
                normal[(a, b)] += fixed[a] * fixed[b];
            }
        }
    };
    match side {
        Side::Users => {
            for t in train.user_triples(row) {
                accumulate(model.item_row(t.item), t.rating);
            }
        }
        Side::Items => {
            for t in train.item_triples(row) {
                accumulate(model.user_row(t.user), t.rating);
            }
        }
    }
    for d in 0..k {
        normal[(d, d)] += lambda;
    }

    let solution = normal
        .lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or(AlsError::Singular { side: side.name(), row })?;
    dst.copy_from_slice(solution.as_slice());
    Ok(())
}

/// Regularized squared-error objective the sweeps minimize blockwise:
/// `sum_KR (r - u.i)^2 + lambda * (|U|_F^2 + |I|_F^2)`.
pub fn als_objective(train: &RatingDataset, model: &FactorModel, lambda: f64) -> f64 {
    let sse = eval::sum_squared_error(&model.predictor(), train);
    let frob: f64 = model.stacked().iter().map(|x| x * x).sum();
    sse + lambda * frob
}

/// Alternates exact user/item half-sweeps. The trace records the objective
/// after each half-sweep; every entry is less than or equal to the previous.
pub fn als_train(
    train: &RatingDataset,
    cfg: &AlsConfig,
) -> Result<(FactorModel, SolverReport), AlsError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut model = FactorModel::init_uniform(
        train.num_users(),
        train.num_items(),
        cfg.rank,
        cfg.seed,
        cfg.init_lower,
        cfg.init_upper,
    )?;
    let mut report = SolverReport::new("als");

    for _ in 0..cfg.sweeps {
        let users = als_solve_side(train, &model, cfg.regularization, Side::Users)?;
        let k = model.rank();
        model.stacked_mut()[..train.num_users() * k].copy_from_slice(&users);
        report.objective_trace.push(als_objective(train, &model, cfg.regularization));

        let items = als_solve_side(train, &model, cfg.regularization, Side::Items)?;
        model.stacked_mut()[train.num_users() * k..].copy_from_slice(&items);
        report.objective_trace.push(als_objective(train, &model, cfg.regularization));
    }

    report.iterations = cfg.sweeps as u64;
    report.final_train_rmse = eval::rmse(&model.predictor(), train);
    report.wall_ms = started.elapsed().as_millis() as u64;
    Ok((model, report))
}
