//! Browser bindings: formula parsing, per-property statistics and
//! composition similarity. Every export returns a JSON string; errors come
//! back as thrown JS `Error`s.

use serde::Serialize;
use supercon_core::elements::{Property, PropertyTable};
use supercon_core::features::{element_ratios, featurize, property_fractions, Statistic};
use supercon_core::formula::{parse_formula, Composition, ParseIssue};
use supercon_core::predict::cosine_similarity;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseReport {
    Ok {
        canonical: String,
        entries: Vec<(String, f64)>,
        ratios: Vec<f64>,
    },
    Rejected {
        kind: String,
        /// Byte offsets into the input.
        start: usize,
        end: usize,
        message: String,
    },
}

pub fn parse_report(formula: &str) -> ParseReport {
    match parse_formula(formula) {
        Ok(c) => ParseReport::Ok {
            canonical: c.to_string(),
            entries: c
                .entries()
                .iter()
                .map(|(e, v)| (e.symbol().to_string(), *v))
                .collect(),
            ratios: element_ratios(&c),
        },
        Err(ParseIssue {
            kind,
            span,
            message,
        }) => ParseReport::Rejected {
            kind: kind.to_string(),
            start: span.start,
            end: span.end,
            message,
        },
    }
}

#[derive(Debug, Serialize)]
pub struct ElementRow {
    pub symbol: String,
    pub ratio: f64,
    pub value: f64,
    pub fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct PropertyView {
    pub property: &'static str,
    pub unit: &'static str,
    pub elements: Vec<ElementRow>,
    /// (feature name, value) in canonical statistic order.
    pub statistics: Vec<(String, f64)>,
}

fn composition(formula: &str) -> Result<Composition, String> {
    parse_formula(formula).map_err(|e| e.to_string())
}

fn property_by_name(name: &str) -> Result<Property, String> {
    Property::ALL
        .into_iter()
        .find(|p| {
            p.feature_suffix().eq_ignore_ascii_case(name) || p.column().eq_ignore_ascii_case(name)
        })
        .ok_or_else(|| format!("unknown property {name:?}"))
}

pub fn property_view(formula: &str, property: &str) -> Result<PropertyView, String> {
    let c = composition(formula)?;
    let p = property_by_name(property)?;
    let table = PropertyTable::builtin();
    let values = c
        .elements()
        .map(|e| table.lookup(e).map(|row| row.get(p)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let fractions = property_fractions(&values).map_err(|e| e.to_string())?;
    let features = featurize(&c, table).map_err(|e| e.to_string())?;
    let elements = c
        .elements()
        .zip(element_ratios(&c))
        .zip(values.iter().zip(&fractions))
        .map(|((e, ratio), (&value, &fraction))| ElementRow {
            symbol: e.symbol().to_string(),
            ratio,
            value,
            fraction,
        })
        .collect();
    let statistics = Statistic::ALL
        .into_iter()
        .map(|s| {
            (
                format!("{}_{}", s.prefix(), p.feature_suffix()),
                features.stat(s, p),
            )
        })
        .collect();
    Ok(PropertyView {
        property: p.feature_suffix(),
        unit: p.unit(),
        elements,
        statistics,
    })
}

pub fn similarity_of(a: &str, b: &str) -> Result<f64, String> {
    let va = composition(a)?
        .composition_vector()
        .map_err(|e| e.to_string())?;
    let vb = composition(b)?
        .composition_vector()
        .map_err(|e| e.to_string())?;
    Ok(cosine_similarity(&va, &vb))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Parses a formula; `{"status":"ok",...}` or `{"status":"rejected",...}`.
#[wasm_bindgen]
pub fn parse(formula: &str) -> String {
    json(&parse_report(formula))
}

/// Names accepted by [`statistics`].
#[wasm_bindgen]
pub fn properties() -> String {
    json(&Property::ALL.map(|p| (p.feature_suffix(), p.unit())))
}

/// Element values, fractions and the ten statistics of one property.
#[wasm_bindgen]
pub fn statistics(formula: &str, property: &str) -> Result<String, JsError> {
    property_view(formula, property)
        .map(|v| json(&v))
        .map_err(|e| JsError::new(&e))
}

/// Cosine similarity of two compositions.
#[wasm_bindgen]
pub fn similarity(a: &str, b: &str) -> Result<f64, JsError> {
    similarity_of(a, b).map_err(|e| JsError::new(&e))
}
