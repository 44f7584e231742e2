//! The 81 composition features: ten statistics for each of eight elemental
//! properties, plus the number of elements.
//!
//! For a material with k elements, stoichiometric ratios p and property
//! values t, the statistics are plain and ratio-weighted versions of the
//! mean, geometric mean, entropy, range and standard deviation. Entropies
//! are taken over the property fractions w_i = t_i / sum(t) and, for the
//! weighted variant, over A_i = p_i w_i / sum(p_j w_j).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::elements::{ElementsError, Property, PropertyTable};
use crate::formula::Composition;

pub const NUM_FEATURES: usize = 81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    Mean,
    WtdMean,
    Gmean,
    WtdGmean,
    Entropy,
    WtdEntropy,
    Range,
    WtdRange,
    Std,
    WtdStd,
}

impl Statistic {
    pub const ALL: [Statistic; 10] = [
        Statistic::Mean,
        Statistic::WtdMean,
        Statistic::Gmean,
        Statistic::WtdGmean,
        Statistic::Entropy,
        Statistic::WtdEntropy,
        Statistic::Range,
        Statistic::WtdRange,
        Statistic::Std,
        Statistic::WtdStd,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::WtdMean => "wtd_mean",
            Statistic::Gmean => "gmean",
            Statistic::WtdGmean => "wtd_gmean",
            Statistic::Entropy => "entropy",
            Statistic::WtdEntropy => "wtd_entropy",
            Statistic::Range => "range",
            Statistic::WtdRange => "wtd_range",
            Statistic::Std => "std",
            Statistic::WtdStd => "wtd_std",
        }
    }
}

/// Feature names in canonical column order: `number_of_elements`, then for
/// each property the ten statistics (`mean_atomic_mass`, ...,
/// `wtd_std_Valence`).
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(NUM_FEATURES);
        names.push("number_of_elements".to_string());
        for p in Property::ALL {
            for s in Statistic::ALL {
                names.push(format!("{}_{}", s.prefix(), p.feature_suffix()));
            }
        }
        names
    })
}

/// Column index of a named feature.
pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

pub fn feature_index_of(stat: Statistic, prop: Property) -> usize {
    1 + prop as usize * Statistic::ALL.len() + stat as usize
}

/// The ten statistics of one property, in [`Statistic::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyStats {
    pub mean: f64,
    pub wtd_mean: f64,
    pub gmean: f64,
    pub wtd_gmean: f64,
    pub entropy: f64,
    pub wtd_entropy: f64,
    pub range: f64,
    pub wtd_range: f64,
    pub std: f64,
    pub wtd_std: f64,
}

impl PropertyStats {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.mean,
            self.wtd_mean,
            self.gmean,
            self.wtd_gmean,
            self.entropy,
            self.wtd_entropy,
            self.range,
            self.wtd_range,
            self.std,
            self.wtd_std,
        ]
    }

    pub fn get(&self, s: Statistic) -> f64 {
        self.to_array()[s as usize]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("property values must be positive, found {0}")]
    NonPositiveProperty(f64),
    #[error("inputs must be non-empty and of equal length (values: {values}, ratios: {ratios})")]
    LengthMismatch { values: usize, ratios: usize },
    #[error("ratios must be positive and sum to 1")]
    BadRatios,
    #[error(transparent)]
    Elements(#[from] ElementsError),
}

/// Stoichiometric ratios: each coefficient over the coefficient sum.
pub fn element_ratios(c: &Composition) -> Vec<f64> {
    let total: f64 = c.entries().iter().map(|(_, x)| x).sum();
    c.entries().iter().map(|(_, x)| x / total).collect()
}

/// Fractions of the total property value.
pub fn property_fractions(t: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if let Some(&bad) = t.iter().find(|&&x| !(x > 0.0)) {
        return Err(FeatureError::NonPositiveProperty(bad));
    }
    let total: f64 = t.iter().sum();
    Ok(t.iter().map(|x| x / total).collect())
}

/// Shannon entropy with the convention 0 ln 0 = 0.
fn entropy(weights: &[f64]) -> f64 {
    let h: f64 = weights
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    // a single weight of exactly 1 gives -0.0
    h.max(0.0)
}

/// Computes the ten statistics of property values `t` under ratios `p`.
pub fn ten_statistics(t: &[f64], p: &[f64]) -> Result<PropertyStats, FeatureError> {
    if t.is_empty() || t.len() != p.len() {
        return Err(FeatureError::LengthMismatch {
            values: t.len(),
            ratios: p.len(),
        });
    }
    let p_sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x > 0.0)) || (p_sum - 1.0).abs() > 1e-9 {
        return Err(FeatureError::BadRatios);
    }
    let w = property_fractions(t)?;
    let k = t.len() as f64;

    let mean = t.iter().sum::<f64>() / k;
    let wtd_mean: f64 = p.iter().zip(t).map(|(p, t)| p * t).sum();
    let gmean = (t.iter().map(|x| x.ln()).sum::<f64>() / k).exp();
    let wtd_gmean = p.iter().zip(t).map(|(p, t)| p * t.ln()).sum::<f64>().exp();

    let pw: Vec<f64> = p.iter().zip(&w).map(|(p, w)| p * w).collect();
    let pw_sum: f64 = pw.iter().sum();
    let a: Vec<f64> = pw.iter().map(|x| x / pw_sum).collect();

    let (lo, hi) = min_max(t.iter().copied());
    let (wlo, whi) = min_max(p.iter().zip(t).map(|(p, t)| p * t));

    let std = (t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k).sqrt();
    let wtd_std = p
        .iter()
        .zip(t)
        .map(|(p, t)| p * (t - wtd_mean).powi(2))
        .sum::<f64>()
        .sqrt();

    // a single element has gmean == mean by definition; avoid exp(ln x) drift
    let (gmean, wtd_gmean) = if t.len() == 1 {
        (t[0], t[0])
    } else {
        (gmean, wtd_gmean)
    };

    Ok(PropertyStats {
        mean,
        wtd_mean,
        gmean,
        wtd_gmean,
        entropy: entropy(&w),
        wtd_entropy: entropy(&a),
        range: hi - lo,
        wtd_range: whi - wlo,
        std,
        wtd_std,
    })
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

/// 81 named features for one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        (values.len() == NUM_FEATURES).then_some(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn number_of_elements(&self) -> usize {
        self.values[0] as usize
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn stat(&self, stat: Statistic, prop: Property) -> f64 {
        self.values[feature_index_of(stat, prop)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        feature_names()
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

pub fn featurize(c: &Composition, table: &PropertyTable) -> Result<FeatureVector, FeatureError> {
    let rows = c
        .elements()
        .map(|e| table.lookup(e))
        .collect::<Result<Vec<_>, _>>()?;
    let p = element_ratios(c);
    let mut values = Vec::with_capacity(NUM_FEATURES);
    values.push(c.len() as f64);
    for prop in Property::ALL {
        let t: Vec<f64> = rows.iter().map(|r| r.get(prop)).collect();
        values.extend(ten_statistics(&t, &p)?.to_array());
    }
    Ok(FeatureVector { values })
}

/// Featurizes many compositions; output order matches input order.
pub fn featurize_batch(
    compositions: &[Composition],
    table: &PropertyTable,
) -> Vec<Result<FeatureVector, FeatureError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        compositions
            .par_iter()
            .map(|c| featurize(c, table))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        compositions.iter().map(|c| featurize(c, table)).collect()
    }
}
