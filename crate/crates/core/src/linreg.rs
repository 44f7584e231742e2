//! Ordinary least squares with an intercept, solved by Householder QR.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};

/// A column whose residual norm after projecting out the earlier columns
/// falls below this fraction of its own norm is treated as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum LinregError {
    #[error("least squares with {params} parameters needs more than {params} rows, got {rows}")]
    InsufficientRows { rows: usize, params: usize },
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Features dropped as linearly dependent on earlier ones; their coefficient is 0.
    pub dropped: Vec<String>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LinregError> {
        if x.len() != self.coefficients.len() {
            return Err(LinregError::DimensionMismatch {
                expected: self.coefficients.len(),
                found: x.len(),
            });
        }
        Ok(self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>())
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, LinregError> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

/// Fits `y ~ 1 + X`. Columns are processed in order and a column that is
/// (numerically) a combination of the intercept and earlier kept columns is
/// dropped, so the first of any dependent group survives.
pub fn fit_ols(data: &Dataset) -> Result<LinearModel, LinregError> {
    let n = data.len();
    let p = data.x.n_cols();
    if n <= p + 1 {
        return Err(LinregError::InsufficientRows {
            rows: n,
            params: p + 1,
        });
    }
    if !data.x.is_finite() {
        return Err(LinregError::NonFiniteInput("feature matrix".into()));
    }
    if data.y.iter().any(|v| !v.is_finite()) {
        return Err(LinregError::NonFiniteInput("targets".into()));
    }

    // column-major design matrix with the intercept first
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    cols.push(vec![1.0; n]);
    cols.extend((0..p).map(|j| data.x.column(j)));
    let mut b = data.y.clone();

    let mut kept: Vec<usize> = Vec::new();
    let mut rank = 0;
    for j in 0..cols.len() {
        let orig = norm(&cols[j]);
        let (head, tail) = cols.split_at_mut(j + 1);
        let col = &mut head[j];
        let s = norm(&col[rank..]);
        if orig == 0.0 || s <= RANK_TOLERANCE * orig || rank == n {
            continue;
        }
        let alpha = if col[rank] > 0.0 { -s } else { s };
        let mut v = col[rank..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for other in tail.iter_mut().chain(std::iter::once(&mut b)) {
            reflect(&v, vv, &mut other[rank..]);
        }
        col[rank] = alpha;
        col[rank + 1..].iter_mut().for_each(|x| *x = 0.0);
        kept.push(j);
        rank += 1;
    }

    // back substitution on the rank x rank upper triangle
    let mut beta = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut acc = b[i];
        for k in i + 1..rank {
            acc -= cols[kept[k]][i] * beta[k];
        }
        beta[i] = acc / cols[kept[i]][i];
    }

    let mut intercept = 0.0;
    let mut coefficients = vec![0.0; p];
    for (&j, &v) in kept.iter().zip(&beta) {
        if j == 0 {
            intercept = v;
        } else {
            coefficients[j - 1] = v;
        }
    }
    let dropped = (1..=p)
        .filter(|j| !kept.contains(j))
        .map(|j| data.feature_names[j - 1].clone())
        .collect();
    Ok(LinearModel {
        intercept,
        coefficients,
        feature_names: data.feature_names.clone(),
        dropped,
    })
}

fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

/// Applies `I - 2 v v^T / (v^T v)` to `x`.
fn reflect(v: &[f64], vv: f64, x: &mut [f64]) {
    if vv == 0.0 {
        return;
    }
    let d: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * d / vv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}
