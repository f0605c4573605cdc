//! RMSE over known ratings and seeded train/test holdout splitting.
//!
//! Error sums run over fixed-size chunks: each chunk is accumulated in
//! dataset order and the chunk totals are combined in dataset order, so the
//! parallel and sequential routes produce bit-identical values and repeated
//! runs reproduce byte-for-byte.

use thiserror::Error;

use crate::model::{BiasedFactorModel, FactorModel, ModelError, RatingDataset, RatingTriple};
use crate::sampling::{self, StreamId};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("test fraction must lie in (0, 1) (got {0})")]
    FractionOutOfRange(f64),
    #[error("need at least 2 ratings to split (got {0})")]
    TooFewRatings(usize),
    #[error("split leaves an empty side ({test} test of {total} ratings)")]
    DegenerateSplit { test: usize, total: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Chunk length of the deterministic partitioned reduction.
const SUM_CHUNK: usize = 4096;

#[inline]
fn chunk_sse<P: Fn(usize, usize) -> f64>(predict: &P, chunk: &[RatingTriple]) -> f64 {
    let mut acc = 0.0;
    for t in chunk {
        let e = t.rating - predict(t.user, t.item);
        acc += e * e;
    }
    acc
}

/// Sum of squared prediction errors over the known ratings, sequential route.
pub fn sse_seq<P: Fn(usize, usize) -> f64>(predict: &P, data: &RatingDataset) -> f64 {
    data.triples().chunks(SUM_CHUNK).map(|c| chunk_sse(predict, c)).sum()
}

/// Sum of squared prediction errors, parallel route. Bit-identical to
/// [`sse_seq`]: same chunking, chunk totals combined in dataset order.
#[cfg(feature = "parallel")]
pub fn sse_par<P: Fn(usize, usize) -> f64 + Sync>(predict: &P, data: &RatingDataset) -> f64 {
    use rayon::prelude::*;
    let partials: Vec<f64> = data
        .triples()
        .par_chunks(SUM_CHUNK)
        .map(|c| chunk_sse(predict, c))
        .collect();
    partials.iter().sum()
}

/// Sum of squared errors via whichever route the build enables.
pub fn sum_squared_error<P: Fn(usize, usize) -> f64 + Sync>(
    predict: &P,
    data: &RatingDataset,
) -> f64 {
    #[cfg(feature = "parallel")]
    {
        sse_par(predict, data)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sse_seq(predict, data)
    }
}

/// Root mean squared error of a predictor over the known ratings.
///
/// Emptiness is rejected at [`RatingDataset`] construction, so the mean is
/// always well defined here.
pub fn rmse<P: Fn(usize, usize) -> f64 + Sync>(predict: &P, data: &RatingDataset) -> f64 {
    (sum_squared_error(predict, data) / data.len() as f64).sqrt()
}

/// RMSE of a plain factor model, with a shape check.
pub fn rmse_model(model: &FactorModel, data: &RatingDataset) -> Result<f64, EvalError> {
    model.check_shape(data)?;
    Ok(rmse(&model.predictor(), data))
}

/// RMSE of a biased factor model, with a shape check.
pub fn rmse_biased(model: &BiasedFactorModel, data: &RatingDataset) -> Result<f64, EvalError> {
    model.base.check_shape(data)?;
    Ok(rmse(&model.predictor(), data))
}

/// RMSE on `test` of the constant predictor that always answers the training
/// mean. Sanity floor every trained model is expected to beat.
pub fn baseline_rmse(train: &RatingDataset, test: &RatingDataset) -> f64 {
    let mean = train.mean_rating();
    rmse(&|_, _| mean, test)
}

/// How triples are assigned to the holdout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SplitMode {
    /// One uniform shuffle over all known ratings.
    Global,
    /// Stratified: the fraction is applied within each user's ratings.
    PerUser,
}

/// A seeded train/test partition of a dataset. The two sides are disjoint,
/// their union is the source, and both carry the source dimensions.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: RatingDataset,
    pub test: RatingDataset,
    pub seed: u64,
    pub test_fraction: f64,
    /// Test triples whose user or item has no training ratings. They are
    /// still predicted (from whatever state the model has for them).
    pub cold_start_test_triples: usize,
}

/// Holdout size contract: `round(fraction * total)`.
pub fn holdout_test_size(total: usize, test_fraction: f64) -> usize {
    (test_fraction * total as f64).round() as usize
}

/// Uniform random partition by seeded shuffle. Both halves preserve the
/// source dataset order internally.
pub fn split_holdout(
    data: &RatingDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<Split, EvalError> {
    split(data, test_fraction, seed, SplitMode::Global)
}

pub fn split(
    data: &RatingDataset,
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<Split, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::FractionOutOfRange(test_fraction));
    }
    if data.len() < 2 {
        return Err(EvalError::TooFewRatings(data.len()));
    }
    let mut in_test = vec![false; data.len()];
    let mut rng = sampling::stream(seed, StreamId::Split);
    match mode {
        SplitMode::Global => {
            let test_size = holdout_test_size(data.len(), test_fraction);
            if test_size == 0 || test_size >= data.len() {
                return Err(EvalError::DegenerateSplit { test: test_size, total: data.len() });
            }
            let mut order: Vec<u32> = (0..data.len() as u32).collect();
            shuffle(&mut order, &mut rng);
            for &i in &order[..test_size] {
                in_test[i as usize] = true;
            }
        }
        SplitMode::PerUser => {
            for user in 0..data.num_users() {
                let mut order: Vec<u32> = user_triple_indices(data, user);
                let take = holdout_test_size(order.len(), test_fraction);
                shuffle(&mut order, &mut rng);
                for &i in &order[..take] {
                    in_test[i as usize] = true;
                }
            }
            let test_size = in_test.iter().filter(|&&b| b).count();
            if test_size == 0 || test_size >= data.len() {
                return Err(EvalError::DegenerateSplit { test: test_size, total: data.len() });
            }
        }
    }

    let mut train_triples = Vec::with_capacity(data.len());
    let mut test_triples = Vec::new();
    for (i, t) in data.triples().iter().enumerate() {
        if in_test[i] {
            test_triples.push(*t);
        } else {
            train_triples.push(*t);
        }
    }
    let train = RatingDataset::new(data.num_users(), data.num_items(), train_triples)?;
    let test = RatingDataset::new(data.num_users(), data.num_items(), test_triples)?;
    let cold = test
        .triples()
        .iter()
        .filter(|t| train.user_rating_count(t.user) == 0 || train.item_rating_count(t.item) == 0)
        .count();
    Ok(Split { train, test, seed, test_fraction, cold_start_test_triples: cold })
}

fn user_triple_indices(data: &RatingDataset, user: usize) -> Vec<u32> {
    data.triples()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.user == user)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Fisher-Yates shuffle driven by the split stream.
fn shuffle<R: rand::Rng>(order: &mut [u32], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}
