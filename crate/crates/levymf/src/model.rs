//! Rating data and latent-factor representations shared by every solver.
//!
//! The factor state is a single dense `(M+N) x K` matrix: rows `0..M` hold the
//! user vectors, rows `M..M+N` the item vectors. A predicted rating is the dot
//! product of a user row with an item row.

use serde::Serialize;
use thiserror::Error;

use crate::sampling::{self, StreamId};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimensions must be positive (got {users} users, {items} items, rank {rank})")]
    InvalidDimensions { users: usize, items: usize, rank: usize },
    #[error("rating list is empty")]
    EmptyRatings,
    #[error("rating index ({user}, {item}) outside {users} x {items}")]
    IndexOutOfRange { user: usize, item: usize, users: usize, items: usize },
    #[error("rating for ({user}, {item}) is not finite")]
    NonFiniteRating { user: usize, item: usize },
    #[error("duplicate rating for ({user}, {item})")]
    DuplicateRating { user: usize, item: usize },
    #[error("initialization bounds must satisfy lower < upper (got [{lower}, {upper}))")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("model shape ({users} x {items}, rank {rank}) does not match expected ({expected_users} x {expected_items})")]
    ShapeMismatch {
        users: usize,
        items: usize,
        rank: usize,
        expected_users: usize,
        expected_items: usize,
    },
}

/// One known rating: user `user` gave item `item` the value `rating`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatingTriple {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

impl RatingTriple {
    pub fn new(user: usize, item: usize, rating: f64) -> Self {
        Self { user, item, rating }
    }
}

/// Sparse list of known ratings over an `M x N` rating matrix, plus per-user
/// and per-item adjacency indexes built at construction (ALS and WNMF consume
/// row/column slices of the known ratings).
#[derive(Debug, Clone)]
pub struct RatingDataset {
    num_users: usize,
    num_items: usize,
    triples: Vec<RatingTriple>,
    by_user: Vec<Vec<u32>>,
    by_item: Vec<Vec<u32>>,
}

impl RatingDataset {
    /// Validates and indexes a list of known ratings.
    ///
    /// Fails on empty lists, out-of-range indices, non-finite ratings, and
    /// duplicate `(user, item)` pairs.
    pub fn new(
        num_users: usize,
        num_items: usize,
        triples: Vec<RatingTriple>,
    ) -> Result<Self, ModelError> {
        if num_users == 0 || num_items == 0 {
            return Err(ModelError::InvalidDimensions {
                users: num_users,
                items: num_items,
                rank: 1,
            });
        }
        if triples.is_empty() {
            return Err(ModelError::EmptyRatings);
        }
        let mut seen = std::collections::HashSet::with_capacity(triples.len());
        let mut by_user = vec![Vec::new(); num_users];
        let mut by_item = vec![Vec::new(); num_items];
        for (idx, t) in triples.iter().enumerate() {
            if t.user >= num_users || t.item >= num_items {
                return Err(ModelError::IndexOutOfRange {
                    user: t.user,
                    item: t.item,
                    users: num_users,
                    items: num_items,
                });
            }
            if !t.rating.is_finite() {
                return Err(ModelError::NonFiniteRating { user: t.user, item: t.item });
            }
            if !seen.insert((t.user as u64) << 32 | t.item as u64) {
                return Err(ModelError::DuplicateRating { user: t.user, item: t.item });
            }
            by_user[t.user].push(idx as u32);
            by_item[t.item].push(idx as u32);
        }
        Ok(Self { num_users, num_items, triples, by_user, by_item })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Number of known ratings.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[RatingTriple] {
        &self.triples
    }

    /// Known ratings of one user, in dataset order.
    pub fn user_triples(&self, user: usize) -> impl Iterator<Item = &RatingTriple> + '_ {
        self.by_user[user].iter().map(move |&i| &self.triples[i as usize])
    }

    /// Known ratings of one item, in dataset order.
    pub fn item_triples(&self, item: usize) -> impl Iterator<Item = &RatingTriple> + '_ {
        self.by_item[item].iter().map(move |&i| &self.triples[i as usize])
    }

    pub fn user_rating_count(&self, user: usize) -> usize {
        self.by_user[user].len()
    }

    pub fn item_rating_count(&self, item: usize) -> usize {
        self.by_item[item].len()
    }

    /// Arithmetic mean of all known ratings.
    pub fn mean_rating(&self) -> f64 {
        let sum: f64 = self.triples.iter().map(|t| t.rating).sum();
        sum / self.triples.len() as f64
    }

    pub fn min_rating(&self) -> f64 {
        self.triples.iter().map(|t| t.rating).fold(f64::INFINITY, f64::min)
    }
}

/// Dense `(M+N) x K` factor matrix: user vectors stacked on top of item
/// vectors so the whole solution is one flat state.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    num_users: usize,
    num_items: usize,
    rank: usize,
    stacked: Vec<f64>,
}

impl FactorModel {
    /// Builds a model from an existing stacked matrix (row-major, `(M+N) x K`).
    pub fn from_stacked(
        num_users: usize,
        num_items: usize,
        rank: usize,
        stacked: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if num_users == 0 || num_items == 0 || rank == 0 {
            return Err(ModelError::InvalidDimensions { users: num_users, items: num_items, rank });
        }
        if stacked.len() != (num_users + num_items) * rank {
            return Err(ModelError::ShapeMismatch {
                users: num_users,
                items: num_items,
                rank,
                expected_users: num_users,
                expected_items: num_items,
            });
        }
        Ok(Self { num_users, num_items, rank, stacked })
    }

    /// Seeded uniform initialization: every entry i.i.d. uniform in
    /// `[lower, upper)`. The same seed yields a bit-identical model.
    pub fn init_uniform(
        num_users: usize,
        num_items: usize,
        rank: usize,
        seed: u64,
        lower: f64,
        upper: f64,
    ) -> Result<Self, ModelError> {
        if num_users == 0 || num_items == 0 || rank == 0 {
            return Err(ModelError::InvalidDimensions { users: num_users, items: num_items, rank });
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(ModelError::InvalidBounds { lower, upper });
        }
        let mut rng = sampling::stream(seed, StreamId::Init);
        let len = (num_users + num_items) * rank;
        let stacked = (0..len).map(|_| sampling::uniform_in(lower, upper, &mut rng)).collect();
        Ok(Self { num_users, num_items, rank, stacked })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn user_row(&self, user: usize) -> &[f64] {
        let k = self.rank;
        &self.stacked[user * k..(user + 1) * k]
    }

    pub fn item_row(&self, item: usize) -> &[f64] {
        let k = self.rank;
        let r = self.num_users + item;
        &self.stacked[r * k..(r + 1) * k]
    }

    pub fn user_row_mut(&mut self, user: usize) -> &mut [f64] {
        let k = self.rank;
        &mut self.stacked[user * k..(user + 1) * k]
    }

    pub fn item_row_mut(&mut self, item: usize) -> &mut [f64] {
        let k = self.rank;
        let r = self.num_users + item;
        &mut self.stacked[r * k..(r + 1) * k]
    }

    /// Mutable access to a user row and an item row at once (they never
    /// overlap: user rows precede item rows in the stack).
    pub fn user_item_rows_mut(&mut self, user: usize, item: usize) -> (&mut [f64], &mut [f64]) {
        let k = self.rank;
        let item_start = (self.num_users + item) * k;
        let (head, tail) = self.stacked.split_at_mut(item_start);
        (&mut head[user * k..user * k + k], &mut tail[..k])
    }

    pub fn stacked(&self) -> &[f64] {
        &self.stacked
    }

    pub fn stacked_mut(&mut self) -> &mut [f64] {
        &mut self.stacked
    }

    /// Predicted rating of `user` for `item`: the dot product of the two
    /// factor rows. No clamping is applied.
    pub fn predict(&self, user: usize, item: usize) -> Result<f64, ModelError> {
        if user >= self.num_users || item >= self.num_items {
            return Err(ModelError::IndexOutOfRange {
                user,
                item,
                users: self.num_users,
                items: self.num_items,
            });
        }
        Ok(self.score(user, item))
    }

    /// Unchecked prediction used on indices already validated against the
    /// owning dataset.
    #[inline]
    pub(crate) fn score(&self, user: usize, item: usize) -> f64 {
        debug_assert!(user < self.num_users && item < self.num_items);
        dot(self.user_row(user), self.item_row(item))
    }

    /// Prediction closure for use with the evaluation routines.
    pub fn predictor(&self) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
        move |user, item| self.score(user, item)
    }

    /// Prediction closure clamped to `[lo, hi]`; off the main path, opt-in.
    pub fn clamped_predictor(&self, lo: f64, hi: f64) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
        move |user, item| self.score(user, item).clamp(lo, hi)
    }

    /// Checks this model against a dataset's dimensions.
    pub fn check_shape(&self, data: &RatingDataset) -> Result<(), ModelError> {
        if self.num_users != data.num_users() || self.num_items != data.num_items() {
            return Err(ModelError::ShapeMismatch {
                users: self.num_users,
                items: self.num_items,
                rank: self.rank,
                expected_users: data.num_users(),
                expected_items: data.num_items(),
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factor model plus global mean and per-user/per-item bias terms, as fit by
/// the biased SGD baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedFactorModel {
    pub base: FactorModel,
    pub mu: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

impl BiasedFactorModel {
    /// Zero-bias wrapper around a factor model; `mu` is supplied by the
    /// caller (the training mean).
    pub fn new(base: FactorModel, mu: f64) -> Self {
        let user_bias = vec![0.0; base.num_users()];
        let item_bias = vec![0.0; base.num_items()];
        Self { base, mu, user_bias, item_bias }
    }

    /// Predicted rating: `mu + b_user + b_item + u_user . i_item`.
    pub fn predict(&self, user: usize, item: usize) -> Result<f64, ModelError> {
        if user >= self.base.num_users() || item >= self.base.num_items() {
            return Err(ModelError::IndexOutOfRange {
                user,
                item,
                users: self.base.num_users(),
                items: self.base.num_items(),
            });
        }
        Ok(self.score(user, item))
    }

    #[inline]
    pub(crate) fn score(&self, user: usize, item: usize) -> f64 {
        self.mu + self.user_bias[user] + self.item_bias[item] + self.base.score(user, item)
    }

    pub fn predictor(&self) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
        move |user, item| self.score(user, item)
    }

    pub fn clamped_predictor(&self, lo: f64, hi: f64) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
        move |user, item| self.score(user, item).clamp(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_from_rows(users: &[&[f64]], items: &[&[f64]]) -> FactorModel {
        let rank = users[0].len();
        let mut stacked = Vec::new();
        for r in users.iter().chain(items.iter()) {
            assert_eq!(r.len(), rank);
            stacked.extend_from_slice(r);
        }
        FactorModel::from_stacked(users.len(), items.len(), rank, stacked).unwrap()
    }

    #[test]
    fn predict_single_term_dot_product() {
        let m = model_from_rows(&[&[2.0]], &[&[3.0]]);
        assert_eq!(m.predict(0, 0).unwrap(), 6.0);
    }

    #[test]
    fn predict_orthogonal_vectors() {
        let m = model_from_rows(&[&[1.0, 0.0]], &[&[0.0, 1.0]]);
        assert_eq!(m.predict(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn predict_hand_computed_dot() {
        // 0.5*4 + 2*0.25 = 2.5
        let m = model_from_rows(&[&[0.5, 2.0]], &[&[4.0, 0.25]]);
        assert!((m.predict(0, 0).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn predict_out_of_range_is_error() {
        let m = model_from_rows(&[&[1.0]], &[&[1.0]]);
        assert!(matches!(m.predict(1, 0), Err(ModelError::IndexOutOfRange { .. })));
        assert!(matches!(m.predict(0, 1), Err(ModelError::IndexOutOfRange { .. })));
    }

    #[test]
    fn predict_biased_additive_composition() {
        let base = model_from_rows(&[&[1.0]], &[&[1.0]]);
        let mut m = BiasedFactorModel::new(base, 3.0);
        m.user_bias[0] = 0.5;
        m.item_bias[0] = -0.5;
        assert_eq!(m.predict(0, 0).unwrap(), 4.0);
    }

    #[test]
    fn predict_biased_zero_bias_reduces_to_predict() {
        let base = model_from_rows(&[&[0.5, 2.0]], &[&[4.0, 0.25]]);
        let plain = base.predict(0, 0).unwrap();
        let m = BiasedFactorModel::new(base, 0.0);
        assert_eq!(m.predict(0, 0).unwrap(), plain);
    }

    #[test]
    fn predict_biased_hand_oracle() {
        // 3.6 + 0.2 - 0.1 + (1*0.5 + 1*0.5) = 4.7
        let base = model_from_rows(&[&[1.0, 1.0]], &[&[0.5, 0.5]]);
        let mut m = BiasedFactorModel::new(base, 3.6);
        m.user_bias[0] = 0.2;
        m.item_bias[0] = -0.1;
        assert!((m.predict(0, 0).unwrap() - 4.7).abs() < 1e-12);
    }

    #[test]
    fn init_shape_contract() {
        let m = FactorModel::init_uniform(2, 3, 4, 7, 0.0, 1.0).unwrap();
        assert_eq!(m.stacked().len(), 5 * 4);
        assert_eq!(m.num_users(), 2);
        assert_eq!(m.num_items(), 3);
        assert_eq!(m.rank(), 4);
    }

    #[test]
    fn init_determinism_contract() {
        let a = FactorModel::init_uniform(4, 5, 3, 99, -1.0, 1.0).unwrap();
        let b = FactorModel::init_uniform(4, 5, 3, 99, -1.0, 1.0).unwrap();
        assert_eq!(a.stacked(), b.stacked());
        let c = FactorModel::init_uniform(4, 5, 3, 100, -1.0, 1.0).unwrap();
        assert_ne!(a.stacked(), c.stacked());
    }

    #[test]
    fn init_range_contract() {
        let m = FactorModel::init_uniform(10, 10, 8, 1, 0.0, 1.0).unwrap();
        assert!(m.stacked().iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert!(FactorModel::init_uniform(0, 3, 4, 7, 0.0, 1.0).is_err());
        assert!(FactorModel::init_uniform(2, 0, 4, 7, 0.0, 1.0).is_err());
        assert!(FactorModel::init_uniform(2, 3, 0, 7, 0.0, 1.0).is_err());
        assert!(matches!(
            FactorModel::init_uniform(2, 3, 4, 7, 1.0, 1.0),
            Err(ModelError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn dataset_validation() {
        let ok = RatingDataset::new(2, 2, vec![RatingTriple::new(0, 1, 4.0)]);
        assert!(ok.is_ok());
        assert!(matches!(
            RatingDataset::new(2, 2, vec![]),
            Err(ModelError::EmptyRatings)
        ));
        assert!(matches!(
            RatingDataset::new(2, 2, vec![RatingTriple::new(2, 0, 1.0)]),
            Err(ModelError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            RatingDataset::new(2, 2, vec![RatingTriple::new(0, 0, f64::NAN)]),
            Err(ModelError::NonFiniteRating { .. })
        ));
        assert!(matches!(
            RatingDataset::new(
                2,
                2,
                vec![RatingTriple::new(0, 0, 1.0), RatingTriple::new(0, 0, 2.0)]
            ),
            Err(ModelError::DuplicateRating { .. })
        ));
    }

    #[test]
    fn dataset_adjacency_slices() {
        let data = RatingDataset::new(
            3,
            2,
            vec![
                RatingTriple::new(0, 0, 1.0),
                RatingTriple::new(0, 1, 2.0),
                RatingTriple::new(2, 1, 3.0),
            ],
        )
        .unwrap();
        assert_eq!(data.user_rating_count(0), 2);
        assert_eq!(data.user_rating_count(1), 0);
        assert_eq!(data.item_rating_count(1), 2);
        let items: Vec<usize> = data.user_triples(0).map(|t| t.item).collect();
        assert_eq!(items, vec![0, 1]);
        assert!((data.mean_rating() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn predict_matches_brute_force_dense_product() {
        // On small instances the per-pair dot product must equal the (m, n)
        // entry of the full U * I product computed naively.
        let m = FactorModel::init_uniform(7, 9, 4, 123, -2.0, 2.0).unwrap();
        for user in 0..7 {
            for item in 0..9 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += m.user_row(user)[k] * m.item_row(item)[k];
                }
                assert_eq!(m.predict(user, item).unwrap(), acc);
            }
        }
    }

    #[test]
    fn predict_is_bilinear_in_user_row() {
        let mut m = FactorModel::init_uniform(3, 3, 5, 5, 0.0, 1.0).unwrap();
        let before = m.predict(1, 2).unwrap();
        let c = 3.25;
        for x in m.user_row_mut(1) {
            *x *= c;
        }
        let after = m.predict(1, 2).unwrap();
        assert!((after - c * before).abs() < 1e-12 * before.abs().max(1.0));
    }
}
