//! Per-run training report shared by every solver.

use serde::Serialize;

use crate::sampling::RNG_ALGORITHM;

/// What a training run did: objective trace, final quality, timing, and the
/// generator identity needed to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    /// Solver identifier (`sa-levy`, `sa-gaussian`, `sgd`, `als`, `wnmf`).
    pub solver: String,
    /// Objective after each iteration / epoch / half-sweep / round. The
    /// objective is solver-specific (train RMSE for annealing and SGD,
    /// regularized squared error for ALS, squared error for WNMF).
    pub objective_trace: Vec<f64>,
    /// Annealing only: best cost seen up to each iteration (non-increasing).
    pub best_trace: Vec<f64>,
    /// Train RMSE of the returned model.
    pub final_train_rmse: f64,
    /// Test RMSE, filled in by the evaluation harness after training.
    pub final_test_rmse: Option<f64>,
    /// Iterations (or epochs / sweeps / rounds) actually executed.
    pub iterations: u64,
    /// Wall-clock training time in milliseconds.
    pub wall_ms: u64,
    /// Identifier of the random-number generator driving the run.
    pub rng_algorithm: String,
}

impl SolverReport {
    pub fn new(solver: impl Into<String>) -> Self {
        Self {
            solver: solver.into(),
            objective_trace: Vec::new(),
            best_trace: Vec::new(),
            final_train_rmse: f64::NAN,
            final_test_rmse: None,
            iterations: 0,
            wall_ms: 0,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}
