//! Training algorithms: simulated annealing plus the SGD, ALS, and WNMF
//! comparison baselines.

pub mod als;
pub mod anneal;
pub mod sgd;
pub mod wnmf;
