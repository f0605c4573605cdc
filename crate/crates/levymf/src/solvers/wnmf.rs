//! Weighted nonnegative matrix factorization by multiplicative updates.
//!
//! The 0/1 weight mask over known ratings is never materialized: every
//! numerator and denominator sum runs over the known-rating adjacency lists
//! directly. Each entry of the updated side is multiplied by
//! `num / max(den, epsilon)`; the floor keeps entries untouched by any known
//! rating from dividing zero by zero (they collapse to zero instead) while
//! leaving well-fed denominators bit-exact.

use std::time::Instant;

use thiserror::Error;

use crate::eval;
use crate::model::{FactorModel, ModelError, RatingDataset};
use crate::report::SolverReport;
use crate::solvers::als::Side;

#[derive(Debug, Error, PartialEq)]
pub enum WnmfError {
    #[error("model entry {index} is negative ({value}); multiplicative updates need a nonnegative state")]
    NegativeEntry { index: usize, value: f64 },
    #[error("rating ({user}, {item}) is negative; nonnegative factorization needs nonnegative ratings")]
    NegativeRating { user: usize, item: usize },
    #[error("epsilon must be positive and finite (got {0})")]
    InvalidEpsilon(f64),
    #[error("initialization bounds must be nonnegative (got lower {0})")]
    NegativeInitBounds(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WnmfConfig {
    pub iterations: u32,
    pub rank: usize,
    pub seed: u64,
    /// Denominator floor guarding entries no known rating touches.
    pub epsilon: f64,
    pub init_lower: f64,
    pub init_upper: f64,
}

impl Default for WnmfConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            rank: 20,
            seed: 0,
            epsilon: 1e-12,
            init_lower: 0.0,
            init_upper: 1.0,
        }
    }
}

impl WnmfConfig {
    pub fn validate(&self) -> Result<(), WnmfError> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(WnmfError::InvalidEpsilon(self.epsilon));
        }
        if self.init_lower < 0.0 {
            return Err(WnmfError::NegativeInitBounds(self.init_lower));
        }
        Ok(())
    }
}

/// One multiplicative update of the chosen side. Checks the nonnegativity
/// preconditions, then rescales every entry of that side in place.
pub fn wnmf_update(
    model: &mut FactorModel,
    train: &RatingDataset,
    side: Side,
    epsilon: f64,
) -> Result<(), WnmfError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(WnmfError::InvalidEpsilon(epsilon));
    }
    model.check_shape(train)?;
    if let Some((index, &value)) = model.stacked().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(WnmfError::NegativeEntry { index, value });
    }
    if let Some(t) = train.triples().iter().find(|t| t.rating < 0.0) {
        return Err(WnmfError::NegativeRating { user: t.user, item: t.item });
    }
    update_side_unchecked(model, train, side, epsilon);
    Ok(())
}

fn update_side_unchecked(
    model: &mut FactorModel,
    train: &RatingDataset,
    side: Side,
    epsilon: f64,
) {
    let k = model.rank();
    let user_len = train.num_users() * k;
    let (users, items) = model.stacked_mut().split_at_mut(user_len);

    match side {
        Side::Users => {
            let items = &*items;
            let update = |user: usize, row: &mut [f64]| {
                let preds: Vec<(f64, f64, usize)> = train
                    .user_triples(user)
                    .map(|t| {
                        let fixed = &items[t.item * k..(t.item + 1) * k];
                        (t.rating, crate::model::dot(row, fixed), t.item)
                    })
                    .collect();
                for (a, entry) in row.iter_mut().enumerate() {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(rating, pred, item) in &preds {
                        let f = items[item * k + a];
                        num += rating * f;
                        den += pred * f;
                    }
                    *entry *= num / den.max(epsilon);
                }
            };
            apply_rows(users, k, update);
        }
        Side::Items => {
            let users = &*users;
            let update = |item: usize, row: &mut [f64]| {
                let preds: Vec<(f64, f64, usize)> = train
                    .item_triples(item)
                    .map(|t| {
                        let fixed = &users[t.user * k..(t.user + 1) * k];
                        (t.rating, crate::model::dot(fixed, row), t.user)
                    })
                    .collect();
                for (a, entry) in row.iter_mut().enumerate() {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(rating, pred, user) in &preds {
                        let f = users[user * k + a];
                        num += rating * f;
                        den += pred * f;
                    }
                    *entry *= num / den.max(epsilon);
                }
            };
            apply_rows(items, k, update);
        }
    }
}

/// Runs `update` on every `k`-wide row of `block`, in parallel when enabled.
/// Rows are independent, so both routes produce identical values.
fn apply_rows<F>(block: &mut [f64], k: usize, update: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        block
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(row, chunk)| update(row, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (row, chunk) in block.chunks_mut(k).enumerate() {
            update(row, chunk);
        }
    }
}

/// Squared-error objective the updates descend:
/// `sum_KR (r - u.i)^2`.
pub fn wnmf_objective(train: &RatingDataset, model: &FactorModel) -> f64 {
    eval::sum_squared_error(&model.predictor(), train)
}

/// Full run: nonnegative initialization, then `iterations` rounds, each one
/// user update followed by one item update. The trace records the objective
/// after each round.
pub fn wnmf_train(
    train: &RatingDataset,
    cfg: &WnmfConfig,
) -> Result<(FactorModel, SolverReport), WnmfError> {
    cfg.validate()?;
    if let Some(t) = train.triples().iter().find(|t| t.rating < 0.0) {
        return Err(WnmfError::NegativeRating { user: t.user, item: t.item });
    }
    let started = Instant::now();
    let mut model = FactorModel::init_uniform(
        train.num_users(),
        train.num_items(),
        cfg.rank,
        cfg.seed,
        cfg.init_lower,
        cfg.init_upper,
    )?;
    let mut report = SolverReport::new("wnmf");

    for _ in 0..cfg.iterations {
        update_side_unchecked(&mut model, train, Side::Users, cfg.epsilon);
        update_side_unchecked(&mut model, train, Side::Items, cfg.epsilon);
        report.objective_trace.push(wnmf_objective(train, &model));
    }

    report.iterations = cfg.iterations as u64;
    report.final_train_rmse = eval::rmse(&model.predictor(), train);
    report.wall_ms = started.elapsed().as_millis() as u64;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingTriple;

    #[test]
    fn one_by_one_update_is_exact() {
        // R=[4], U=[1], I=[2]: U' = 1 * (4*2) / ((1*2)*2) = 2 and U'.I = 4.
        let train = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, 4.0)]).unwrap();
        let mut model = FactorModel::from_stacked(1, 1, 1, vec![1.0, 2.0]).unwrap();
        wnmf_update(&mut model, &train, Side::Users, 1e-12).unwrap();
        assert_eq!(model.user_row(0), &[2.0]);
        assert_eq!(model.predict(0, 0).unwrap(), 4.0);
    }

    #[test]
    fn exact_fit_is_a_fixed_point() {
        // When U.I already reproduces every known rating the ratios are
        // exactly one and nothing moves.
        let mut model = FactorModel::init_uniform(4, 3, 2, 11, 0.1, 1.0).unwrap();
        let mut triples = Vec::new();
        for u in 0..4 {
            for i in 0..3 {
                triples.push(RatingTriple::new(u, i, model.predict(u, i).unwrap()));
            }
        }
        let train = RatingDataset::new(4, 3, triples).unwrap();
        let before = model.stacked().to_vec();
        wnmf_update(&mut model, &train, Side::Users, 1e-12).unwrap();
        wnmf_update(&mut model, &train, Side::Items, 1e-12).unwrap();
        assert_eq!(model.stacked(), before.as_slice());
    }

    #[test]
    fn entries_stay_nonnegative() {
        let mut triples = Vec::new();
        for u in 0..6 {
            for i in 0..5 {
                if (u + 2 * i) % 3 != 0 {
                    triples.push(RatingTriple::new(u, i, ((u * i) % 5) as f64));
                }
            }
        }
        let train = RatingDataset::new(6, 5, triples).unwrap();
        let mut model = FactorModel::init_uniform(6, 5, 3, 2, 0.0, 1.0).unwrap();
        for _ in 0..10 {
            wnmf_update(&mut model, &train, Side::Users, 1e-12).unwrap();
            wnmf_update(&mut model, &train, Side::Items, 1e-12).unwrap();
            assert!(model.stacked().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn rejects_negative_state_and_ratings() {
        let train = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, 4.0)]).unwrap();
        let mut bad = FactorModel::from_stacked(1, 1, 1, vec![-0.5, 2.0]).unwrap();
        assert!(matches!(
            wnmf_update(&mut bad, &train, Side::Users, 1e-12),
            Err(WnmfError::NegativeEntry { index: 0, .. })
        ));
        let neg = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, -1.0)]).unwrap();
        let mut model = FactorModel::from_stacked(1, 1, 1, vec![0.5, 2.0]).unwrap();
        assert!(matches!(
            wnmf_update(&mut model, &neg, Side::Users, 1e-12),
            Err(WnmfError::NegativeRating { .. })
        ));
        let cfg = WnmfConfig { rank: 1, ..WnmfConfig::default() };
        assert!(matches!(wnmf_train(&neg, &cfg), Err(WnmfError::NegativeRating { .. })));
    }

    /// Dense brute-force route: materialize the weight mask and evaluate the
    /// update rule with full matrix products. Test-only oracle.
    fn dense_user_update(model: &FactorModel, train: &RatingDataset, epsilon: f64) -> Vec<f64> {
        let (m, n, k) = (model.num_users(), model.num_items(), model.rank());
        let mut w = vec![vec![0.0; n]; m];
        let mut r = vec![vec![0.0; n]; m];
        for t in train.triples() {
            w[t.user][t.item] = 1.0;
            r[t.user][t.item] = t.rating;
        }
        let mut out = Vec::with_capacity(m * k);
        for user in 0..m {
            for a in 0..k {
                let mut num = 0.0;
                let mut den = 0.0;
                for item in 0..n {
                    let pred = model.predict(user, item).unwrap();
                    num += w[user][item] * r[user][item] * model.item_row(item)[a];
                    den += w[user][item] * pred * model.item_row(item)[a];
                }
                out.push(model.user_row(user)[a] * (num / den.max(epsilon)));
            }
        }
        out
    }

    #[test]
    fn sparse_update_matches_dense_mask_oracle() {
        let mut triples = Vec::new();
        for u in 0..5 {
            for i in 0..4 {
                if (u * 4 + i) % 3 != 1 {
                    triples.push(RatingTriple::new(u, i, 1.0 + ((u + i) % 4) as f64));
                }
            }
        }
        let train = RatingDataset::new(5, 4, triples).unwrap();
        let mut model = FactorModel::init_uniform(5, 4, 2, 33, 0.1, 1.0).unwrap();
        let expected = dense_user_update(&model, &train, 1e-12);
        wnmf_update(&mut model, &train, Side::Users, 1e-12).unwrap();
        for (got, want) in model.stacked()[..5 * 2].iter().zip(&expected) {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "got {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn exact_nonnegative_rank_k_data_is_fit() {
        let truth = FactorModel::init_uniform(8, 6, 2, 5, 0.2, 1.2).unwrap();
        let mut triples = Vec::new();
        for u in 0..8 {
            for i in 0..6 {
                triples.push(RatingTriple::new(u, i, truth.predict(u, i).unwrap()));
            }
        }
        let train = RatingDataset::new(8, 6, triples).unwrap();
        let cfg = WnmfConfig { iterations: 500, rank: 2, seed: 3, ..WnmfConfig::default() };
        let (_, report) = wnmf_train(&train, &cfg).unwrap();
        assert!(report.final_train_rmse < 1e-3, "rmse {}", report.final_train_rmse);
    }

    #[test]
    fn objective_is_non_increasing_per_round() {
        let mut triples = Vec::new();
        for u in 0..10 {
            for i in 0..8 {
                if (u + i) % 4 != 2 {
                    triples.push(RatingTriple::new(u, i, 1.0 + ((u * 2 + i) % 5) as f64));
                }
            }
        }
        let train = RatingDataset::new(10, 8, triples).unwrap();
        let cfg = WnmfConfig { iterations: 40, rank: 3, seed: 1, ..WnmfConfig::default() };
        let (_, report) = wnmf_train(&train, &cfg).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "objective rose: {w:?}");
        }
    }

    #[test]
    fn zero_iterations_and_determinism() {
        let train = RatingDataset::new(1, 1, vec![RatingTriple::new(0, 0, 4.0)]).unwrap();
        let cfg = WnmfConfig { iterations: 0, rank: 2, ..WnmfConfig::default() };
        let (model, report) = wnmf_train(&train, &cfg).unwrap();
        assert!(report.objective_trace.is_empty());
        let init = FactorModel::init_uniform(1, 1, 2, cfg.seed, 0.0, 1.0).unwrap();
        assert_eq!(model.stacked(), init.stacked());

        let cfg = WnmfConfig { iterations: 7, rank: 2, ..WnmfConfig::default() };
        let (m1, r1) = wnmf_train(&train, &cfg).unwrap();
        let (m2, r2) = wnmf_train(&train, &cfg).unwrap();
        assert_eq!(m1.stacked(), m2.stacked());
        assert_eq!(r1.objective_trace, r2.objective_trace);
    }
}
