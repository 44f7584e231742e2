use serde::{Deserialize, Serialize};

use super::{leaf_weight, split_gain};
use crate::data::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Left,
    Right,
}

fn is_left(d: &Direction) -> bool {
    *d == Direction::Left
}

/// A regression tree. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Reserved for missing values, which the pipeline never produces.
        #[serde(default, skip_serializing_if = "is_left")]
        missing_goes: Direction,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    /// Raw tree output (before shrinkage).
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    missing_goes,
                    left,
                    right,
                    ..
                } => {
                    let v = x[*feature];
                    let go_left = if v.is_nan() {
                        *missing_goes == Direction::Left
                    } else {
                        v < *threshold
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Number of split levels; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Visits every split as `(feature, threshold, gain)` in pre-order.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, f64)) {
        if let TreeNode::Split {
            feature,
            threshold,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *threshold, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn leaf_weights(&self) -> Vec<f64> {
        let mut out = Vec::new();
        fn walk(n: &TreeNode, out: &mut Vec<f64>) {
            match n {
                TreeNode::Leaf { weight } => out.push(*weight),
                TreeNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn is_finite(&self) -> bool {
        match self {
            TreeNode::Leaf { weight } => weight.is_finite(),
            TreeNode::Split {
                threshold,
                left,
                right,
                ..
            } => threshold.is_finite() && left.is_finite() && right.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// number of rows that go left, in the node's sorted order for `feature`
    n_left: usize,
}

/// Exact greedy tree grower over column-major data.
pub(crate) struct Grower<'a> {
    pub columns: &'a [Vec<f64>],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub params: TreeParams,
}

/// Per-feature row lists for one node, each sorted by that feature's value.
pub(crate) struct NodeRows {
    pub features: Vec<usize>,
    pub sorted: Vec<Vec<u32>>,
}

impl Grower<'_> {
    /// Grows a tree and adds each accepted split's gain to `gains[feature]`.
    pub fn grow(&self, rows: NodeRows, gains: &mut [f64]) -> TreeNode {
        let mut scratch = vec![false; self.grad.len()];
        self.grow_node(rows, 0, gains, &mut scratch)
    }

    fn grow_node(
        &self,
        rows: NodeRows,
        depth: usize,
        gains: &mut [f64],
        goes_left: &mut [bool],
    ) -> TreeNode {
        let members = &rows.sorted[0];
        let (g, h) = members.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let leaf = || TreeNode::Leaf {
            weight: leaf_weight(g, h, self.params.lambda).unwrap_or(0.0),
        };
        if depth >= self.params.max_depth || members.len() < 2 {
            return leaf();
        }
        let best = match self.best_split(&rows, g, h) {
            Some(c) if c.gain > 0.0 => c,
            _ => return leaf(),
        };

        let pos = rows
            .features
            .iter()
            .position(|&f| f == best.feature)
            .unwrap();
        for (i, &r) in rows.sorted[pos].iter().enumerate() {
            goes_left[r as usize] = i < best.n_left;
        }
        let n = members.len();
        let mut left = Vec::with_capacity(rows.features.len());
        let mut right = Vec::with_capacity(rows.features.len());
        for list in rows.sorted {
            let mut l = Vec::with_capacity(best.n_left);
            let mut r = Vec::with_capacity(n - best.n_left);
            for row in list {
                if goes_left[row as usize] {
                    l.push(row);
                } else {
                    r.push(row);
                }
            }
            left.push(l);
            right.push(r);
        }
        gains[best.feature] += best.gain;
        let features = rows.features;
        let left = self.grow_node(
            NodeRows {
                features: features.clone(),
                sorted: left,
            },
            depth + 1,
            gains,
            goes_left,
        );
        let right = self.grow_node(
            NodeRows {
                features,
                sorted: right,
            },
            depth + 1,
            gains,
            goes_left,
        );
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            missing_goes: Direction::Left,
            gain: best.gain,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&self, rows: &NodeRows, g: f64, h: f64) -> Option<Candidate> {
        let per_feature: Vec<Option<Candidate>> = {
            let scan = |(&f, list): (&usize, &Vec<u32>)| self.best_for_feature(f, list, g, h);
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                if rows.sorted[0].len() * rows.features.len() >= 1 << 16 {
                    rows.features
                        .par_iter()
                        .zip(rows.sorted.par_iter())
                        .map(scan)
                        .collect()
                } else {
                    rows.features
                        .iter()
                        .zip(rows.sorted.iter())
                        .map(scan)
                        .collect()
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                rows.features
                    .iter()
                    .zip(rows.sorted.iter())
                    .map(scan)
                    .collect()
            }
        };
        // features are in ascending order; strict > keeps the lowest index on ties
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best
    }

    fn best_for_feature(&self, feature: usize, list: &[u32], g: f64, h: f64) -> Option<Candidate> {
        let col = &self.columns[feature];
        let p = &self.params;
        let mut gl = 0.0;
        let mut hl = 0.0;
        let mut best: Option<Candidate> = None;
        for i in 0..list.len().saturating_sub(1) {
            let r = list[i] as usize;
            gl += self.grad[r];
            hl += self.hess[r];
            let v = col[r];
            let next = col[list[i + 1] as usize];
            if !(v < next) {
                continue;
            }
            let hr = h - hl;
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, g - gl, hr, p.lambda, p.gamma);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold: midpoint(v, next),
                    n_left: i + 1,
                });
            }
        }
        best
    }
}

/// Threshold strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

pub(crate) fn columns_of(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.n_cols()).map(|j| x.column(j)).collect()
}

/// Row indices sorted by each column's value (ties by row index).
pub(crate) fn presort(columns: &[Vec<f64>]) -> Vec<Vec<u32>> {
    columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect()
}

/// Builds one tree over every row and feature of `x`.
///
/// Split points lie midway between consecutive distinct values; gain ties
/// go to the lowest feature index, then the lowest threshold.
pub fn build_tree(x: &Matrix, grad: &[f64], hess: &[f64], params: &TreeParams) -> TreeNode {
    assert_eq!(x.n_rows(), grad.len());
    assert_eq!(x.n_rows(), hess.len());
    let columns = columns_of(x);
    let sorted = presort(&columns);
    let grower = Grower {
        columns: &columns,
        grad,
        hess,
        params: *params,
    };
    let mut gains = vec![0.0; x.n_cols()];
    if x.n_cols() == 0 || x.n_rows() == 0 {
        let g: f64 = grad.iter().sum();
        let h: f64 = hess.iter().sum();
        return TreeNode::Leaf {
            weight: leaf_weight(g, h, params.lambda).unwrap_or(0.0),
        };
    }
    grower.grow(
        NodeRows {
            features: (0..x.n_cols()).collect(),
            sorted,
        },
        &mut gains,
    )
}
