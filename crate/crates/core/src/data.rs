//! Dense feature matrices and the 82-column features CSV.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::features::{feature_names, FeatureVector};

pub const TARGET_COLUMN: &str = "critical_temp";

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Matrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n_rows * n_cols).then_some(Matrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Features plus targets with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self, DataError> {
        if x.n_rows() != y.len() {
            return Err(DataError::Shape(format!(
                "{} feature rows but {} targets",
                x.n_rows(),
                y.len()
            )));
        }
        if x.n_cols() != feature_names.len() {
            return Err(DataError::Shape(format!(
                "{} columns but {} names",
                x.n_cols(),
                feature_names.len()
            )));
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
        })
    }

    pub fn from_features(features: &[FeatureVector], y: Vec<f64>) -> Result<Self, DataError> {
        let n_cols = feature_names().len();
        let mut data = Vec::with_capacity(features.len() * n_cols);
        for f in features {
            data.extend_from_slice(f.values());
        }
        let x = Matrix::from_vec(features.len(), n_cols, data).expect("81 values per vector");
        Dataset::new(x, y, feature_names().to_vec())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("features CSV is missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: {value:?} is not a finite number")]
    BadValue {
        row: u64,
        column: String,
        value: String,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a features CSV: the 81 named feature columns (in any order)
/// plus `critical_temp`. Extra columns are ignored, so the published
/// `train.csv` loads unchanged.
pub fn read_features_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let cols = feature_names()
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>, _>>()?;
    let target = find(TARGET_COLUMN)?;

    let mut data = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |idx: usize| -> Result<f64, DataError> {
            let cell = rec.get(idx).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::BadValue {
                    row: i as u64 + 1,
                    column: headers[idx].to_string(),
                    value: cell.to_string(),
                })
        };
        for &c in &cols {
            data.push(parse(c)?);
        }
        y.push(parse(target)?);
    }
    let x = Matrix::from_vec(y.len(), cols.len(), data).expect("row-major fill");
    Dataset::new(x, y, feature_names().to_vec())
}

/// Writes the 81 feature columns, then `critical_temp` when targets are given.
pub fn write_features_csv<W: Write>(
    features: &[FeatureVector],
    targets: Option<&[f64]>,
    writer: W,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = feature_names().iter().map(String::as_str).collect();
    if targets.is_some() {
        header.push(TARGET_COLUMN);
    }
    w.write_record(&header)?;
    for (i, f) in features.iter().enumerate() {
        let mut rec: Vec<String> = f.values().iter().map(|v| v.to_string()).collect();
        if let Some(t) = targets {
            rec.push(t[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
