//! Superconductor critical-temperature modeling: chemical formula parsing,
//! elemental property tables, composition features, data cleaning,
//! gradient-boosted trees, least squares, and evaluation harnesses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dataprep;
pub mod elements;
pub mod eval;
pub mod features;
pub mod formula;
pub mod gbt;
pub mod linreg;
pub mod model;
pub mod predict;
