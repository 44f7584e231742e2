//! Formula-level prediction and lookup of similar training compositions.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataprep::CleanRow;
use crate::elements::PropertyTable;
use crate::features::{feature_names, featurize, FeatureError};
use crate::formula::{parse_formula, Composition, OutOfRangeElement, ParseIssue};
use crate::model::{ModelError, SavedModel};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.98;
pub const NO_MATCH_MESSAGE: &str = "Not able to find match(es)";
pub const EXISTENCE_WARNING: &str =
    "warning: the prediction assumes the compound exists; existence is not checked";

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error(transparent)]
    Parse(#[from] ParseIssue),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    OutOfRange(#[from] OutOfRangeElement),
    #[error("input has no `material` column")]
    MissingMaterialColumn,
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `a.b / (|a| |b|)`, or 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // rounding can push identical directions just past 1
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub material: String,
    pub critical_temp: f64,
    pub similarity: f64,
}

/// Training compositions indexed for similarity lookup.
#[derive(Debug, Clone, Default)]
pub struct ReferenceSet {
    entries: Vec<(String, Vec<f64>, f64)>,
}

impl ReferenceSet {
    /// Rows with elements beyond the supported range are skipped.
    pub fn from_rows(rows: &[CleanRow]) -> Self {
        let entries = rows
            .iter()
            .filter_map(|r| {
                let v = r.composition.composition_vector().ok()?;
                Some((r.composition.to_string(), v, r.critical_temp))
            })
            .collect();
        ReferenceSet { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with similarity at least `threshold`, most similar first
    /// (ties keep file order).
    pub fn neighbors(
        &self,
        c: &Composition,
        threshold: f64,
    ) -> Result<Vec<Neighbor>, OutOfRangeElement> {
        let q = c.composition_vector()?;
        let mut out: Vec<Neighbor> = self
            .entries
            .iter()
            .filter_map(|(m, v, tc)| {
                let s = cosine_similarity(&q, v);
                (s >= threshold).then(|| Neighbor {
                    material: m.clone(),
                    critical_temp: *tc,
                    similarity: s,
                })
            })
            .collect();
        out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub formula: String,
    pub predicted_tc: f64,
    /// `None` when no lookup was requested.
    pub neighbors: Option<Vec<Neighbor>>,
}

/// Parses, featurizes and predicts one formula.
pub fn predict_composition(
    c: &Composition,
    model: &SavedModel,
    table: &PropertyTable,
) -> Result<f64, PredictError> {
    model.check_features(feature_names())?;
    let f = featurize(c, table)?;
    Ok(model.predict(f.values())?)
}

pub fn predict(
    formula: &str,
    model: &SavedModel,
    table: &PropertyTable,
    lookup: Option<(&ReferenceSet, f64)>,
) -> Result<PredictionResult, PredictError> {
    let c = parse_formula(formula.trim())?;
    let predicted_tc = predict_composition(&c, model, table)?;
    let neighbors = lookup.map(|(refs, t)| refs.neighbors(&c, t)).transpose()?;
    Ok(PredictionResult {
        formula: formula.trim().to_string(),
        predicted_tc,
        neighbors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub material: String,
    pub predicted_tc: Option<f64>,
    pub error: Option<String>,
}

/// Predicts every material; failures become error rows instead of aborting.
pub fn batch_predict(
    materials: &[String],
    model: &SavedModel,
    table: &PropertyTable,
) -> Vec<BatchRow> {
    let one = |m: &String| match predict(m, model, table, None) {
        Ok(r) => BatchRow {
            material: m.clone(),
            predicted_tc: Some(r.predicted_tc),
            error: None,
        },
        Err(e) => BatchRow {
            material: m.clone(),
            predicted_tc: None,
            error: Some(e.to_string()),
        },
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        materials.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        materials.iter().map(one).collect()
    }
}

/// Reads the `material` column of a CSV.
pub fn read_materials_csv<R: Read>(reader: R) -> Result<Vec<String>, PredictError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == "material")
        .ok_or(PredictError::MissingMaterialColumn)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        out.push(rec?.get(idx).unwrap_or("").to_string());
    }
    Ok(out)
}

/// Writes `material,predicted_tc,error`.
pub fn write_batch_csv<W: Write>(rows: &[BatchRow], writer: W) -> Result<(), PredictError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["material", "predicted_tc", "error"])?;
    for r in rows {
        w.write_record([
            r.material.clone(),
            r.predicted_tc.map_or(String::new(), |v| v.to_string()),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::features::featurize_batch;
    use crate::gbt::BoosterParams;
    use crate::model::ModelSpec;

    fn rows(items: &[(&str, f64)]) -> Vec<CleanRow> {
        items
            .iter()
            .enumerate()
            .map(|(i, (m, t))| CleanRow {
                composition: parse_formula(m).unwrap(),
                critical_temp: *t,
                source_row: i as u64 + 1,
            })
            .collect()
    }

    fn tiny_model(train: &[CleanRow]) -> SavedModel {
        let table = PropertyTable::builtin();
        let comps: Vec<_> = train.iter().map(|r| r.composition.clone()).collect();
        let fs: Vec<_> = featurize_batch(&comps, table)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let ds =
            Dataset::from_features(&fs, train.iter().map(|r| r.critical_temp).collect()).unwrap();
        ModelSpec::Gbt(BoosterParams {
            n_trees: 5,
            ..Default::default()
        })
        .fit(&ds, 0)
        .unwrap()
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[6.0, 8.0]), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn neighbors_sorted_and_thresholded() {
        let refs = ReferenceSet::from_rows(&rows(&[
            ("Ba0.15La1.85Cu1O4", 37.0),
            ("Ba0.2La1.8Cu1O4", 30.0),
            ("Mg1B2", 39.0),
            ("Ba0.2La1.8Cu1O4", 28.0),
        ]));
        let q = parse_formula("Ba0.2La1.8CuO4").unwrap();
        let n = refs.neighbors(&q, 0.98).unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!((n[0].critical_temp, n[1].critical_temp), (30.0, 28.0));
        assert!(n.windows(2).all(|w| w[0].similarity >= w[1].similarity));
        assert!(n
            .iter()
            .all(|x| x.similarity >= 0.98 && x.similarity <= 1.0));
        assert!(refs
            .neighbors(&parse_formula("NaSn2As2").unwrap(), 0.98)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn scaled_formula_gives_same_answer() {
        let train = rows(&[
            ("Mg1B2", 39.0),
            ("Nb0.8Pd0.2", 1.98),
            ("Fe1Se1", 8.0),
            ("Hg1", 4.15),
        ]);
        let model = tiny_model(&train);
        let refs = ReferenceSet::from_rows(&train);
        let table = PropertyTable::builtin();
        let a = predict("MgB2", &model, table, Some((&refs, 0.9))).unwrap();
        let b = predict("Mg2B4", &model, table, Some((&refs, 0.9))).unwrap();
        assert_eq!(a.predicted_tc, b.predicted_tc);
        assert_eq!(a.neighbors, b.neighbors);
    }

    #[test]
    fn batch_keeps_going_past_bad_rows() {
        let train = rows(&[("Mg1B2", 39.0), ("Nb0.8Pd0.2", 1.98), ("Fe1Se1", 8.0)]);
        let model = tiny_model(&train);
        let input = "material\nMgB2\nmgB2\nFCl\n";
        let mats = read_materials_csv(input.as_bytes()).unwrap();
        let out = batch_predict(&mats, &model, PropertyTable::builtin());
        assert_eq!(out.len(), 3);
        assert!(out[0].predicted_tc.is_some() && out[2].predicted_tc.is_some());
        assert!(out[1].error.as_deref().unwrap().contains("mg"));
        let mut buf = Vec::new();
        write_batch_csv(&out, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        assert!(batch_predict(&[], &model, PropertyTable::builtin()).is_empty());
        assert!(matches!(
            read_materials_csv("x\n1\n".as_bytes()),
            Err(PredictError::MissingMaterialColumn)
        ));
    }
}
