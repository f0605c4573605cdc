//! Matrix-factorization collaborative filtering with a Levy-flight simulated
//! annealing solver and SGD / ALS / WNMF baselines.
//!
//! The solution state is a single stacked `(M+N) x K` factor matrix
//! ([`model::FactorModel`]); train and test quality is measured by RMSE over
//! the known ratings ([`eval`]). All randomness flows through seeded,
//! stream-split generators ([`sampling`]), so every run reproduces exactly.
//!
//! With the default `parallel` feature the rating-sum reductions and the
//! ALS / WNMF row updates run on rayon; results are bit-identical to the
//! sequential fallback (`--no-default-features`).

pub mod dataio;
pub mod eval;
pub mod model;
pub mod report;
pub mod runner;
pub mod sampling;
pub mod solvers;
pub mod synth;
pub mod testing;

pub use eval::{baseline_rmse, rmse, split_holdout, Split, SplitMode};
pub use model::{BiasedFactorModel, FactorModel, RatingDataset, RatingTriple};
pub use report::SolverReport;
pub use sampling::{LevyParams, WalkKind};
pub use solvers::anneal::{anneal, AnnealConfig, Cooling, MoveScope};
pub use solvers::als::{als_train, AlsConfig};
pub use solvers::sgd::{sgd_train, SgdConfig};
pub use solvers::wnmf::{wnmf_train, WnmfConfig};
