//! Independent reference checks, run by the property tests and by the
//! acceptance runner in the CLI crate.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use supercon_core::data::{Dataset, Matrix};
use supercon_core::elements::{Property, PropertyTable};
use supercon_core::features::{featurize, Statistic};
use supercon_core::formula::{Composition, Element};
use supercon_core::gbt::{
    self, build_tree, fit_with, leaf_weight, BoosterParams, TreeNode, TreeParams,
};
use supercon_core::model::{self, SavedModel};

pub type Check = Result<(), TestCaseError>;

pub fn element() -> impl Strategy<Value = Element> {
    (1u8..=86).prop_map(|z| Element::from_atomic_number(z).unwrap())
}

/// Coefficients with up to three decimals, as they appear in formulas.
pub fn coefficient() -> impl Strategy<Value = f64> {
    (1u32..20_000).prop_map(|n| n as f64 / 1000.0)
}

pub fn composition() -> impl Strategy<Value = Composition> {
    prop::collection::btree_map(element(), coefficient(), 1..=8)
        .prop_map(|m| m.into_iter().collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|pairs| Composition::from_pairs(pairs).unwrap())
}

/// Relative closeness, absolute near zero (a std of 0 can come back as 1e-16).
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn same_features(a: &Composition, b: &Composition) -> Check {
    let table = PropertyTable::builtin();
    let fa = featurize(a, table).unwrap();
    let fb = featurize(b, table).unwrap();
    for ((name, x), (_, y)) in fa.iter().zip(fb.iter()) {
        prop_assert!(close(x, y, 1e-9), "{}: {} vs {}", name, x, y);
    }
    Ok(())
}

pub fn check_scale_invariance(c: &Composition, k: f64) -> Check {
    let scaled = Composition::from_pairs(c.entries().iter().map(|&(e, v)| (e, v * k))).unwrap();
    same_features(c, &scaled)
}

pub fn check_permutation_invariance(c: &Composition, seed: u64) -> Check {
    let mut entries = c.entries().to_vec();
    // deterministic rotation plus reversal
    let n = entries.len();
    entries.rotate_left((seed as usize) % n);
    if seed.is_multiple_of(2) {
        entries.reverse();
    }
    same_features(c, &Composition::from_pairs(entries).unwrap())
}

pub fn check_am_gm(c: &Composition) -> Check {
    let f = featurize(c, PropertyTable::builtin()).unwrap();
    for p in Property::ALL {
        let (m, g) = (f.stat(Statistic::Mean, p), f.stat(Statistic::Gmean, p));
        let (wm, wg) = (
            f.stat(Statistic::WtdMean, p),
            f.stat(Statistic::WtdGmean, p),
        );
        prop_assert!(g <= m * (1.0 + 1e-12), "{:?}: gmean {} > mean {}", p, g, m);
        prop_assert!(
            wg <= wm * (1.0 + 1e-12),
            "{:?}: wtd_gmean {} > wtd_mean {}",
            p,
            wg,
            wm
        );
    }
    Ok(())
}

pub fn check_entropy_bounds(c: &Composition) -> Check {
    let f = featurize(c, PropertyTable::builtin()).unwrap();
    let max = (c.len() as f64).ln();
    for p in Property::ALL {
        for s in [Statistic::Entropy, Statistic::WtdEntropy] {
            let h = f.stat(s, p);
            prop_assert!(
                h >= 0.0 && h <= max + 1e-12,
                "{:?} {:?}: {} not in [0, {}]",
                s,
                p,
                h,
                max
            );
        }
        prop_assert!(f.stat(Statistic::Range, p) >= 0.0);
        prop_assert!(f.stat(Statistic::Std, p) >= 0.0);
        prop_assert!(f.stat(Statistic::WtdStd, p) >= 0.0);
    }
    Ok(())
}

/// Rows of small integer-valued features with integer gradients.
pub fn table_rows(
    max_rows: usize,
    max_features: usize,
) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2..=max_rows, 1..=max_features).prop_flat_map(|(n, f)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..6).prop_map(f64::from), f), n),
            prop::collection::vec((-5i8..=5).prop_map(f64::from), n),
        )
    })
}

pub fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
    let x = Matrix::from_rows(rows).unwrap();
    let names = (0..x.n_cols()).map(|i| format!("x{i}")).collect();
    Dataset::new(x, y.to_vec(), names).unwrap()
}

fn leaf_objective(p: &TreeParams) -> impl Fn(f64, f64) -> f64 + '_ {
    move |gs: f64, hs: f64| -gs * gs / (2.0 * (hs + p.lambda)) + p.gamma
}

/// Penalized objective of every admissible stump (and of the bare leaf,
/// first), by enumeration: sum over leaves of -G^2 / (2 (H + lambda)) + gamma.
pub fn brute_force_stumps(
    rows: &[Vec<f64>],
    g: &[f64],
    p: &TreeParams,
) -> Vec<(f64, Option<(usize, f64)>)> {
    let obj = leaf_objective(p);
    let (gt, ht) = (g.iter().sum::<f64>(), rows.len() as f64);
    let mut all = vec![(obj(gt, ht), None)];
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for (r, gi) in rows.iter().zip(g) {
                if r[f] < t {
                    gl += gi;
                    hl += 1.0;
                }
            }
            let hr = ht - hl;
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            all.push((obj(gl, hl) + obj(gt - gl, hr), Some((f, t))));
        }
    }
    all
}

fn stump_objective(tree: &TreeNode, rows: &[Vec<f64>], g: &[f64], p: &TreeParams) -> f64 {
    let obj = leaf_objective(p);
    match tree {
        TreeNode::Leaf { .. } => obj(g.iter().sum(), rows.len() as f64),
        TreeNode::Split {
            feature, threshold, ..
        } => {
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (r, gi) in rows.iter().zip(g) {
                if r[*feature] < *threshold {
                    gl += gi;
                    hl += 1.0;
                } else {
                    gr += gi;
                    hr += 1.0;
                }
            }
            obj(gl, hl) + obj(gr, hr)
        }
    }
}

pub type StumpCase = ((Vec<Vec<f64>>, Vec<f64>), f64, f64, f64);

pub fn stump_case() -> impl Strategy<Value = StumpCase> {
    (
        table_rows(20, 3),
        prop::sample::select(vec![0.0, 0.5, 1.0, 3.0]),
        prop::sample::select(vec![0.0, 0.0, 1.0]),
        prop::sample::select(vec![0.0, 1.0, 2.0, 3.0]),
    )
}

pub fn check_stump(case: &StumpCase) -> Check {
    let ((rows, g), lambda, gamma, mcw) = case;
    let p = TreeParams {
        lambda: *lambda,
        gamma: *gamma,
        max_depth: 1,
        min_child_weight: *mcw,
    };
    let h = vec![1.0; rows.len()];
    let tree = build_tree(&Matrix::from_rows(rows).unwrap(), g, &h, &p);
    let mut all = brute_force_stumps(rows, g, &p);
    // stable sort keeps the leaf, then (feature, threshold) order, among equals
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (best_obj, best) = all[0];
    let got = stump_objective(&tree, rows, g, &p);
    prop_assert!(
        (got - best_obj).abs() < 1e-9,
        "tree {:?} objective {} vs brute force {} {:?}",
        tree,
        got,
        best_obj,
        best
    );
    // when the optimum is unique (beyond rounding), the choice must match exactly
    let unique = all.get(1).is_none_or(|second| second.0 - best_obj > 1e-9);
    if unique {
        let chosen = match &tree {
            TreeNode::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        };
        prop_assert_eq!(chosen, best);
    }
    Ok(())
}

/// Argmin of g w + (h + lambda) w^2 / 2 over a uniform grid.
pub fn grid_argmin(g: f64, h: f64, lambda: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|w| (g * w + 0.5 * (h + lambda) * w * w, w))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1
}

pub fn leaf_grid_case() -> impl Strategy<Value = (f64, f64, f64)> {
    (
        -20.0f64..20.0,
        0.0f64..20.0,
        prop::sample::select(vec![0.5, 1.0, 2.0, 5.0]),
    )
}

pub fn check_leaf_grid(&(g, h, lambda): &(f64, f64, f64)) -> Check {
    let step = 1e-3;
    let closed = leaf_weight(g, h, lambda).unwrap();
    // |G| / (H + lambda) < 40 for these ranges
    let grid = grid_argmin(g, h, lambda, -45.0, 45.0, step);
    prop_assert!(
        (closed - grid).abs() < step,
        "g={} h={} lambda={}: {} vs {}",
        g,
        h,
        lambda,
        closed,
        grid
    );
    Ok(())
}

/// Every leaf paired with the rows that reach it.
fn leaves_with_rows<'a>(
    tree: &'a TreeNode,
    rows: &[usize],
    x: &[Vec<f64>],
    out: &mut Vec<(&'a TreeNode, Vec<usize>)>,
) {
    match tree {
        TreeNode::Leaf { .. } => out.push((tree, rows.to_vec())),
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][*feature] < *threshold);
            leaves_with_rows(left, &l, x, out);
            leaves_with_rows(right, &r, x, out);
        }
    }
}

pub fn check_leaf_minimizers(rows: &[Vec<f64>], g: &[f64], lambda: f64, depth: usize) -> Check {
    let p = TreeParams {
        lambda,
        gamma: 0.0,
        max_depth: depth,
        min_child_weight: 1.0,
    };
    let h = vec![1.0; rows.len()];
    let tree = build_tree(&Matrix::from_rows(rows).unwrap(), g, &h, &p);
    let mut leaves = Vec::new();
    let all: Vec<usize> = (0..rows.len()).collect();
    leaves_with_rows(&tree, &all, rows, &mut leaves);
    let eps = 1e-4;
    for (leaf, members) in leaves {
        let TreeNode::Leaf { weight } = leaf else {
            unreachable!()
        };
        let gs: f64 = members.iter().map(|&i| g[i]).sum();
        let hs = members.len() as f64;
        let obj = |w: f64| gs * w + 0.5 * (hs + lambda) * w * w;
        prop_assert!(obj(weight + eps) > obj(*weight));
        prop_assert!(obj(weight - eps) > obj(*weight));
    }
    Ok(())
}

pub type DescentCase = ((Vec<Vec<f64>>, Vec<f64>), f64, usize);

pub fn descent_case() -> impl Strategy<Value = DescentCase> {
    (
        table_rows(40, 3),
        prop::sample::select(vec![0.1, 0.3, 1.0]),
        1usize..4,
    )
}

/// Training mse after each tree, with full row and column sampling.
pub fn check_descent(case: &DescentCase) -> Check {
    let ((rows, y), eta, depth) = case;
    let ds = dataset(rows, y);
    let params = BoosterParams {
        eta: *eta,
        max_depth: *depth,
        n_trees: 15,
        subsample: 1.0,
        colsample: 1.0,
        gamma: 0.0,
        ..Default::default()
    };
    let mse = |pred: &[f64]| {
        pred.iter()
            .zip(y)
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / y.len() as f64
    };
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut last = mse(&vec![base; y.len()]);
    let mut worst = None;
    fit_with(&ds, &params, 0, |t, s| {
        let m = mse(&s.predictions);
        if m > last * (1.0 + 1e-12) + 1e-12 && worst.is_none() {
            worst = Some((t, last, m));
        }
        last = m;
    })
    .unwrap();
    prop_assert!(worst.is_none(), "loss rose at tree {:?}", worst);
    Ok(())
}

pub fn determinism_case() -> impl Strategy<Value = ((Vec<Vec<f64>>, Vec<f64>), u64)> {
    (table_rows(60, 3), any::<u64>())
}

/// Two fits with one seed write byte-identical model files.
pub fn check_determinism(((rows, y), seed): &((Vec<Vec<f64>>, Vec<f64>), u64)) -> Check {
    let ds = dataset(rows, y);
    let params = BoosterParams {
        n_trees: 8,
        subsample: 0.6,
        colsample: 0.7,
        max_depth: 3,
        ..Default::default()
    };
    let a = SavedModel::Gbt(gbt::fit(&ds, &params, *seed).unwrap());
    let b = SavedModel::Gbt(gbt::fit(&ds, &params, *seed).unwrap());
    let (ja, jb) = (model::to_json(&a), model::to_json(&b));
    prop_assert_eq!(&ja, &jb);
    let back = model::from_json(&ja).unwrap();
    prop_assert_eq!(&back, &a);
    prop_assert_eq!(model::to_json(&back), ja);
    Ok(())
}
