//! Gradient-boosted regression trees with the penalized second-order
//! objective: squared-error loss plus `gamma * T + lambda/2 * sum(w_j^2)`
//! per tree, grown by exact greedy split search.

mod booster;
mod tree;

pub use booster::{fit, fit_with, BoostedModel, TrainState};
pub use tree::{build_tree, Direction, TreeNode, TreeParams};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GbtError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate leaf: hessian sum {hessian} plus lambda {lambda} is not positive")]
    DegenerateLeaf { hessian: f64, lambda: f64 },
    #[error("model has no splits, so feature importance is undefined")]
    NoSplits,
}

/// Tuning parameters for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterParams {
    /// Shrinkage applied to every tree's output.
    pub eta: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Penalty per leaf; a split must gain more than this.
    pub gamma: f64,
    pub max_depth: usize,
    /// Minimum hessian sum (row count, for squared error) in each child.
    pub min_child_weight: f64,
    /// Fraction of rows drawn without replacement for each tree.
    pub subsample: f64,
    /// Fraction of features drawn for each tree.
    pub colsample: f64,
    pub n_trees: usize,
}

impl Default for BoosterParams {
    fn default() -> Self {
        BoosterParams {
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            n_trees: 100,
        }
    }
}

impl BoosterParams {
    /// Best configuration from the published tuning grid.
    pub fn paper_best() -> Self {
        BoosterParams {
            eta: 0.02,
            max_depth: 16,
            min_child_weight: 1.0,
            colsample: 0.5,
            subsample: 0.5,
            n_trees: 374,
            ..BoosterParams::default()
        }
    }

    /// Looks up a named preset (`paper-best`, `default`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-best" => Some(Self::paper_best()),
            "default" => Some(Self::default()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |msg: String| Err(GbtError::InvalidParams(msg));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must be in (0, 1], got {}", self.eta));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            ));
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad(format!(
                "colsample must be in (0, 1], got {}",
                self.colsample
            ));
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        if self.n_trees < 1 {
            return bad("n_trees must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            ));
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            lambda: self.lambda,
            gamma: self.gamma,
            max_depth: self.max_depth,
            min_child_weight: self.min_child_weight,
        }
    }
}

/// Minimizer of `G w + (H + lambda) w^2 / 2`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64, GbtError> {
    if !(h + lambda > 0.0) {
        return Err(GbtError::DegenerateLeaf { hessian: h, lambda });
    }
    let w = -g / (h + lambda);
    // keep +0.0 for symmetric residuals
    Ok(if w == 0.0 { 0.0 } else { w })
}

/// Objective reduction from splitting a node into the given children.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}
