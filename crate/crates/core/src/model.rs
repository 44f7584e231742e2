//! Versioned model files and the train/predict contract shared by both model kinds.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::gbt::{self, BoostedModel, BoosterParams, GbtError};
use crate::linreg::{self, LinearModel, LinregError};

pub const MODEL_FORMAT: &str = "supercon-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Linreg(#[from] LinregError),
    #[error("not a model file: {0}")]
    Format(String),
    #[error("unsupported model file version {found} (this build reads {MODEL_VERSION})")]
    Version { found: u32 },
    #[error("model expects features {expected:?}, data has {found:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Gbt(BoosterParams),
    Ols,
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Gbt(_) => "gbt",
            ModelSpec::Ols => "ols",
        }
    }

    pub fn fit(&self, data: &Dataset, seed: u64) -> Result<SavedModel, ModelError> {
        Ok(match self {
            ModelSpec::Gbt(p) => SavedModel::Gbt(gbt::fit(data, p, seed)?),
            ModelSpec::Ols => SavedModel::Ols(linreg::fit_ols(data)?),
        })
    }
}

/// A fitted model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Gbt(BoostedModel),
    Ols(LinearModel),
}

impl SavedModel {
    pub fn feature_names(&self) -> &[String] {
        match self {
            SavedModel::Gbt(m) => &m.feature_names,
            SavedModel::Ols(m) => &m.feature_names,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Gbt(_) => "gbt",
            SavedModel::Ols(_) => "ols",
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(match self {
            SavedModel::Gbt(m) => m.predict(x)?,
            SavedModel::Ols(m) => m.predict(x)?,
        })
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// Fails unless `names` equals the model's feature list.
    pub fn check_features(&self, names: &[String]) -> Result<(), ModelError> {
        if self.feature_names() != names {
            return Err(ModelError::FeatureMismatch {
                expected: self.feature_names().to_vec(),
                found: names.to_vec(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'static str,
    version: u32,
    model: &'a SavedModel,
}

#[derive(Deserialize)]
struct FileIn {
    format: String,
    version: u32,
    model: serde_json::Value,
}

/// Serializes as compact JSON. Output is byte-identical for equal models.
pub fn to_json(model: &SavedModel) -> String {
    serde_json::to_string(&FileOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        model,
    })
    .expect("model serializes")
}

pub fn from_json(text: &str) -> Result<SavedModel, ModelError> {
    let file: FileIn = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(ModelError::Format(format!(
            "format field is {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(ModelError::Version {
            found: file.version,
        });
    }
    serde_json::from_value(file.model).map_err(|e| ModelError::Format(e.to_string()))
}

pub fn write_model<W: Write>(model: &SavedModel, mut w: W) -> Result<(), ModelError> {
    w.write_all(to_json(model).as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<SavedModel, ModelError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    from_json(&text)
}
