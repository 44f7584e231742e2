use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{columns_of, presort, Grower, NodeRows};
use super::{BoosterParams, GbtError, TreeNode};
use crate::data::{Dataset, Matrix};

/// Additive tree ensemble: `base_score + eta * sum_k tree_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub eta: f64,
    pub params: BoosterParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Sum of split gains per feature, in `feature_names` order.
    pub feature_gains: Vec<f64>,
    pub trees: Vec<TreeNode>,
}

/// Per-row gradient statistics for squared-error loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub predictions: Vec<f64>,
    pub gradients: Vec<f64>,
    pub hessians: Vec<f64>,
}

impl TrainState {
    fn new(base: f64, n: usize) -> Self {
        TrainState {
            predictions: vec![base; n],
            gradients: vec![0.0; n],
            hessians: vec![1.0; n],
        }
    }

    /// g = prediction - y, h = 1.
    fn refresh(&mut self, y: &[f64]) {
        for ((g, p), y) in self.gradients.iter_mut().zip(&self.predictions).zip(y) {
            *g = p - y;
        }
        self.hessians.iter_mut().for_each(|h| *h = 1.0);
    }
}

fn sample_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

/// Fits a boosted ensemble. Each tree draws its row subsample, then its
/// column subsample, from one ChaCha8 stream seeded with `seed`, so
/// results are bit-identical for equal inputs.
pub fn fit(data: &Dataset, params: &BoosterParams, seed: u64) -> Result<BoostedModel, GbtError> {
    fit_with(data, params, seed, |_, _| {})
}

/// Same as [`fit`], calling `on_tree(t, state)` after tree `t` updates the predictions.
pub fn fit_with(
    data: &Dataset,
    params: &BoosterParams,
    seed: u64,
    mut on_tree: impl FnMut(usize, &TrainState),
) -> Result<BoostedModel, GbtError> {
    params.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(GbtError::InvalidParams(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if !data.x.is_finite() {
        return Err(GbtError::NonFiniteInput("feature matrix".into()));
    }
    if let Some(i) = data.y.iter().position(|v| !v.is_finite()) {
        return Err(GbtError::NonFiniteInput(format!("target at row {i}")));
    }

    let n_features = data.x.n_cols();
    let columns = columns_of(&data.x);
    let presorted = presort(&columns);
    let base_score = data.y.iter().sum::<f64>() / n as f64;
    let mut state = TrainState::new(base_score, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rows = sample_size(params.subsample, n);
    let n_cols = sample_size(params.colsample, n_features.max(1));
    let mut in_sample = vec![false; n];
    let mut gains = vec![0.0; n_features];
    let mut trees = Vec::with_capacity(params.n_trees);

    for t in 0..params.n_trees {
        let mut rows = index::sample(&mut rng, n, n_rows).into_vec();
        rows.sort_unstable();
        let mut features = index::sample(&mut rng, n_features, n_cols).into_vec();
        features.sort_unstable();

        state.refresh(&data.y);
        in_sample.iter_mut().for_each(|m| *m = false);
        for &r in &rows {
            in_sample[r] = true;
        }
        let sorted = features
            .iter()
            .map(|&f| {
                presorted[f]
                    .iter()
                    .copied()
                    .filter(|&r| in_sample[r as usize])
                    .collect()
            })
            .collect();

        let grower = Grower {
            columns: &columns,
            grad: &state.gradients,
            hess: &state.hessians,
            params: params.tree_params(),
        };
        let tree = grower.grow(NodeRows { features, sorted }, &mut gains);

        for (i, p) in state.predictions.iter_mut().enumerate() {
            *p += params.eta * tree.predict(data.x.row(i));
        }
        trees.push(tree);
        on_tree(t, &state);
    }

    Ok(BoostedModel {
        base_score,
        eta: params.eta,
        params: params.clone(),
        seed,
        feature_names: data.feature_names.clone(),
        feature_gains: gains,
        trees,
    })
}

impl BoostedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GbtError> {
        if x.len() != self.n_features() {
            return Err(GbtError::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, GbtError> {
        self.check_dim(x)?;
        let raw: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.base_score + self.eta * raw)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, GbtError> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// Predictions after each prefix of the ensemble: element `k` uses the
    /// first `k + 1` trees.
    pub fn staged_predict(&self, x: &[f64]) -> Result<Vec<f64>, GbtError> {
        self.check_dim(x)?;
        let mut acc = self.base_score;
        Ok(self
            .trees
            .iter()
            .map(|t| {
                acc += self.eta * t.predict(x);
                acc
            })
            .collect())
    }

    /// Keeps the first `n` trees. Gains are recomputed from the kept trees.
    pub fn truncate(&self, n: usize) -> BoostedModel {
        let mut m = self.clone();
        m.trees.truncate(n);
        m.params.n_trees = m.trees.len();
        m.feature_gains = m.gains_from_trees();
        m
    }

    /// Per-feature gain sums recomputed by walking the stored trees.
    pub fn gains_from_trees(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features()];
        for t in &self.trees {
            t.for_each_split(&mut |f, _, g| gains[f] += g);
        }
        gains
    }

    /// Each feature's share of the total split gain, in feature order.
    pub fn importance(&self) -> Result<Vec<(String, f64)>, GbtError> {
        let total: f64 = self.feature_gains.iter().sum();
        if !(total > 0.0) {
            return Err(GbtError::NoSplits);
        }
        Ok(self
            .feature_names
            .iter()
            .cloned()
            .zip(self.feature_gains.iter().map(|g| g / total))
            .collect())
    }

    /// Importance sorted by share, descending (ties by feature order).
    pub fn ranked_importance(&self) -> Result<Vec<(String, f64)>, GbtError> {
        let mut imp = self.importance()?;
        imp.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(imp)
    }
}
