//! Repeated holdout, grid search over boosting parameters, and
//! descriptive summaries of critical temperatures.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::dataprep::CleanRow;
use crate::formula::Element;
use crate::gbt::{self, BoosterParams};
use crate::model::{ModelError, ModelSpec, SavedModel};

pub const DEFAULT_REPEATS: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("need at least 3 rows for a train/test split, got {0}")]
    TooFewRows(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that can be fit on a training set and predict a matrix.
pub trait Learner {
    type Model;
    fn fit(&self, train: &Dataset, seed: u64) -> Result<Self::Model, EvalError>;
    fn predict(&self, model: &Self::Model, x: &Matrix) -> Result<Vec<f64>, EvalError>;
}

impl Learner for ModelSpec {
    type Model = SavedModel;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<SavedModel, EvalError> {
        Ok(ModelSpec::fit(self, train, seed)?)
    }

    fn predict(&self, model: &SavedModel, x: &Matrix) -> Result<Vec<f64>, EvalError> {
        Ok(model.predict_batch(x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutPlan {
    pub repeats: usize,
    pub seed: u64,
}

impl Default for HoldoutPlan {
    fn default() -> Self {
        HoldoutPlan {
            repeats: DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

/// Train and test row indices for one repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with the stream for `(seed, repeat)` and puts the first
/// `floor(2n/3)` indices in the training set. Each repeat has its own
/// stream, so adding repeats never changes earlier splits.
pub fn holdout_split(n: usize, seed: u64, repeat: usize) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let test = idx.split_off(2 * n / 3);
    Split { train: idx, test }
}

/// Seed handed to the learner for a given repeat.
fn fit_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add(repeat as u64)
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / y.len() as f64
}

pub fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    mse(pred, y).sqrt()
}

/// `1 - SSE/SST`. A constant target gives 1 for a perfect fit, else 0.
pub fn r_squared(pred: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse: f64 = pred.iter().zip(y).map(|(p, y)| (p - y) * (p - y)).sum();
    if sst == 0.0 {
        return if sse == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - sse / sst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub params: Option<BoosterParams>,
    pub plan: HoldoutPlan,
    /// Test-set mse per repeat, in repeat order.
    pub mse: Vec<f64>,
    pub r2_per_repeat: Vec<f64>,
    /// Square root of the mean test mse.
    pub rmse: f64,
    /// Mean of the per-repeat rmse values, kept for comparison only.
    pub mean_of_rmse: f64,
    pub r2: f64,
}

/// Repeats: shuffle, split 2/3 train, fit, score on the rest.
/// Returns the per-repeat test mse and R².
pub fn repeated_holdout<L: Learner>(
    data: &Dataset,
    learner: &L,
    plan: &HoldoutPlan,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if data.len() < 3 {
        return Err(EvalError::TooFewRows(data.len()));
    }
    if plan.repeats < 1 {
        return Err(EvalError::InvalidPlan("repeats must be at least 1".into()));
    }
    let one = |r: usize| -> Result<(f64, f64), EvalError> {
        let split = holdout_split(data.len(), plan.seed, r);
        let train = data.select(&split.train);
        let test = data.select(&split.test);
        let model = learner.fit(&train, fit_seed(plan.seed, r))?;
        let pred = learner.predict(&model, &test.x)?;
        Ok((mse(&pred, &test.y), r_squared(&pred, &test.y)))
    };
    let results: Vec<(f64, f64)> = (0..plan.repeats).map(one).collect::<Result<_, _>>()?;
    Ok(results.into_iter().unzip())
}

/// [`repeated_holdout`] for a [`ModelSpec`], packaged as a report.
pub fn evaluate(
    data: &Dataset,
    spec: &ModelSpec,
    plan: &HoldoutPlan,
) -> Result<EvalReport, EvalError> {
    let (mse_list, r2_list) = repeated_holdout(data, spec, plan)?;
    Ok(report(spec, plan, mse_list, r2_list))
}

fn report(spec: &ModelSpec, plan: &HoldoutPlan, mse: Vec<f64>, r2: Vec<f64>) -> EvalReport {
    let k = mse.len() as f64;
    EvalReport {
        model: spec.id().to_string(),
        params: match spec {
            ModelSpec::Gbt(p) => Some(p.clone()),
            ModelSpec::Ols => None,
        },
        plan: *plan,
        rmse: (mse.iter().sum::<f64>() / k).sqrt(),
        mean_of_rmse: mse.iter().map(|m| m.sqrt()).sum::<f64>() / k,
        r2: r2.iter().sum::<f64>() / k,
        mse,
        r2_per_repeat: r2,
    }
}

/// Parameter lists whose Cartesian product forms the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Trees grown per cell; every prefix length is scored.
    pub n_trees: usize,
    pub eta: Vec<f64>,
    pub colsample: Vec<f64>,
    pub subsample: Vec<f64>,
    pub min_child_weight: Vec<f64>,
    pub max_depth: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda() -> Vec<f64> {
    vec![1.0]
}

fn default_gamma() -> Vec<f64> {
    vec![0.0]
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::InvalidGrid(e.to_string()))
    }

    pub fn size(&self) -> usize {
        self.eta.len()
            * self.colsample.len()
            * self.subsample.len()
            * self.min_child_weight.len()
            * self.max_depth.len()
            * self.lambda.len()
            * self.gamma.len()
    }

    /// All parameter combinations in nested list order.
    pub fn cells(&self) -> Result<Vec<BoosterParams>, EvalError> {
        if self.size() == 0 {
            return Err(EvalError::InvalidGrid(
                "every parameter list must be non-empty".into(),
            ));
        }
        let mut out = Vec::with_capacity(self.size());
        for &eta in &self.eta {
            for &colsample in &self.colsample {
                for &subsample in &self.subsample {
                    for &min_child_weight in &self.min_child_weight {
                        for &max_depth in &self.max_depth {
                            for &lambda in &self.lambda {
                                for &gamma in &self.gamma {
                                    let p = BoosterParams {
                                        eta,
                                        lambda,
                                        gamma,
                                        max_depth,
                                        min_child_weight,
                                        subsample,
                                        colsample,
                                        n_trees: self.n_trees,
                                    };
                                    p.validate()
                                        .map_err(|e| EvalError::InvalidGrid(e.to_string()))?;
                                    out.push(p);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: BoosterParams,
    /// Tree count with the lowest test rmse.
    pub best_trees: usize,
    pub rmse: f64,
    /// Test rmse after 1, 2, ..., n_trees trees.
    pub curve: Vec<f64>,
}

fn lexicographic(a: &BoosterParams, b: &BoosterParams) -> Ordering {
    let key = |p: &BoosterParams| {
        [
            p.eta,
            p.colsample,
            p.subsample,
            p.min_child_weight,
            p.max_depth as f64,
            p.lambda,
            p.gamma,
        ]
    };
    key(a)
        .iter()
        .zip(key(b).iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Test rmse of every prefix of the ensemble, accumulated tree by tree.
pub fn staged_rmse(model: &gbt::BoostedModel, test: &Dataset) -> Vec<f64> {
    let mut pred = vec![model.base_score; test.len()];
    model
        .trees
        .iter()
        .map(|t| {
            for (i, p) in pred.iter_mut().enumerate() {
                *p += model.eta * t.predict(test.x.row(i));
            }
            rmse(&pred, &test.y)
        })
        .collect()
}

/// Scores every cell on one fixed split (repeat 0 of `seed`). Rows come back
/// sorted by rmse, then fewer trees, then parameters.
pub fn grid_search(data: &Dataset, grid: &GridSpec) -> Result<Vec<GridRow>, EvalError> {
    grid_search_with(data, grid, |_, _| {})
}

/// [`grid_search`] with a callback after each finished cell (index, row).
pub fn grid_search_with(
    data: &Dataset,
    grid: &GridSpec,
    mut on_cell: impl FnMut(usize, &GridRow),
) -> Result<Vec<GridRow>, EvalError> {
    let cells = grid.cells()?;
    if data.len() < 3 {
        return Err(EvalError::TooFewRows(data.len()));
    }
    let split = holdout_split(data.len(), grid.seed, 0);
    let train = data.select(&split.train);
    let test = data.select(&split.test);
    let mut rows = Vec::with_capacity(cells.len());
    for (i, params) in cells.into_iter().enumerate() {
        let model = gbt::fit(&train, &params, grid.seed).map_err(ModelError::from)?;
        let curve = staged_rmse(&model, &test);
        let (best, &score) = curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("n_trees >= 1");
        let row = GridRow {
            params,
            best_trees: best + 1,
            rmse: score,
            curve,
        };
        on_cell(i, &row);
        rows.push(row);
    }
    rows.sort_by(|a, b| {
        a.rmse
            .total_cmp(&b.rmse)
            .then(a.best_trees.cmp(&b.best_trees))
            .then_with(|| lexicographic(&a.params, &b.params))
    });
    Ok(rows)
}

/// Row selection for [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Overall,
    /// One group per element present in the data, in atomic-number order.
    PerElement,
    /// Rows containing the element, then rows without it.
    Contains(Element),
    /// Rows containing both Cu and O, then the rest.
    Cuprate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub group: String,
    pub size: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 with `sd_defined = false` for one row.
    pub sd: f64,
    pub sd_defined: bool,
}

/// Linear-interpolation quantile of sorted data (the common "type 7").
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Describes `values`; an empty slice gives a size-0 row of NaNs.
pub fn describe(group: impl Into<String>, values: &[f64]) -> Summary {
    let group = group.into();
    let n = values.len();
    if n == 0 {
        return Summary {
            group,
            size: 0,
            min: f64::NAN,
            q1: f64::NAN,
            median: f64::NAN,
            q3: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            sd: f64::NAN,
            sd_defined: false,
        };
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / n as f64;
    let sd_defined = n > 1;
    let sd = if sd_defined {
        (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        group,
        size: n,
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[n - 1],
        mean,
        sd,
        sd_defined,
    }
}

pub fn summarize(rows: &[CleanRow], grouping: Grouping) -> Vec<Summary> {
    let tc = |pred: &dyn Fn(&CleanRow) -> bool| -> Vec<f64> {
        rows.iter()
            .filter(|r| pred(r))
            .map(|r| r.critical_temp)
            .collect()
    };
    match grouping {
        Grouping::Overall => vec![describe("overall", &tc(&|_| true))],
        Grouping::PerElement => Element::supported()
            .filter_map(|e| {
                let v = tc(&|r| r.composition.contains(e));
                (!v.is_empty()).then(|| describe(e.symbol(), &v))
            })
            .collect(),
        Grouping::Contains(e) => vec![
            describe(
                format!("contains {}", e.symbol()),
                &tc(&|r| r.composition.contains(e)),
            ),
            describe(
                format!("not contains {}", e.symbol()),
                &tc(&|r| !r.composition.contains(e)),
            ),
        ],
        Grouping::Cuprate => {
            let cu = Element::from_symbol("Cu").expect("Cu");
            let o = Element::from_symbol("O").expect("O");
            let is = |r: &CleanRow| r.composition.contains(cu) && r.composition.contains(o);
            vec![
                describe("cuprate", &tc(&is)),
                describe("non-cuprate", &tc(&|r| !is(r))),
            ]
        }
    }
}
