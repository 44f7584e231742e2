//! Cleaning of raw (material, critical temperature) records.
//!
//! Rules run in a fixed order and every input row gets exactly one audit
//! entry. Row-specific manual repairs are deliberately not encoded; the
//! audit log is what an operator triages from.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::formula::{parse_formula, Composition, Element, IssueKind};

/// Highest reliably recorded critical temperature as of mid-2017, in K.
pub const DEFAULT_TC_CEILING: f64 = 203.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub material: String,
    pub critical_temp: Option<f64>,
    /// 1-based data row number in the source file.
    pub source_row: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DropMissingTc,
    DropZeroTc,
    TcCeiling,
    OxygenSuffix,
    ParseError,
    ZeroCoefficient,
    ZGt86,
    Dedup,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::DropMissingTc => "drop_missing_tc",
            Rule::DropZeroTc => "drop_zero_tc",
            Rule::TcCeiling => "tc_ceiling",
            Rule::OxygenSuffix => "oxygen_suffix",
            Rule::ParseError => "parse_error",
            Rule::ZeroCoefficient => "zero_coefficient",
            Rule::ZGt86 => "z_gt_86",
            Rule::Dedup => "dedup",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Kept,
    Dropped,
    Modified,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Kept => "kept",
            Action::Dropped => "dropped",
            Action::Modified => "modified",
        }
    }

    /// Modified rows are kept rows.
    pub fn is_kept(self) -> bool {
        !matches!(self, Action::Dropped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub source_row: u64,
    pub action: Action,
    pub rule: Option<Rule>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanRow {
    pub composition: Composition,
    pub critical_temp: f64,
    pub source_row: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CleanDataset {
    pub rows: Vec<CleanRow>,
    pub audit: Vec<AuditEntry>,
}

impl CleanDataset {
    pub fn dropped(&self) -> usize {
        self.audit.iter().filter(|a| !a.action.is_kept()).count()
    }

    /// Renders kept rows back to raw records, numbered 1..n.
    pub fn to_raw_records(&self) -> Vec<RawRecord> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| RawRecord {
                material: r.composition.to_string(),
                critical_temp: Some(r.critical_temp),
                source_row: i as u64 + 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    pub tc_ceiling: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            tc_ceiling: DEFAULT_TC_CEILING,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FileFormatError {
    #[error("input CSV is missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn suffix_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"O(\d+(?:\.\d+)?)[-+][XZ](?:$|([A-Z]))").unwrap())
}

/// Truncates variable-oxygen suffixes: `O7-X` becomes `O7`, `O5+X`
/// becomes `O5` (also `-Z`/`+Z`). Anything else passes through.
pub fn normalize_oxygen_suffix(material: &str) -> String {
    let mut out = material.to_string();
    // a replacement can expose no new match, but loop until stable anyway
    loop {
        let next = suffix_regex()
            .replace_all(&out, |caps: &regex::Captures| {
                format!("O{}{}", &caps[1], caps.get(2).map_or("", |m| m.as_str()))
            })
            .into_owned();
        if next == out {
            return out;
        }
        out = next;
    }
}

/// Describes an oxygen token with a sign that the normalizer left alone.
pub fn unnormalized_oxygen_note(material: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"O[\d.]*[-+]\S*").unwrap());
    re.find(material)
        .map(|m| format!("unrecognized oxygen suffix {:?}", m.as_str()))
}

/// Applies the cleaning rules in order: missing Tc, zero Tc, the Tc
/// ceiling, oxygen-suffix normalization, parsing (zero coefficients are
/// logged separately), Z > 86 exclusion, then exact-duplicate removal on
/// (canonical composition, Tc), keeping the first occurrence.
pub fn clean(records: &[RawRecord], config: &CleanConfig) -> CleanDataset {
    let mut out = CleanDataset::default();
    let mut seen: HashSet<(String, u64)> = HashSet::new();

    for rec in records {
        let drop = |rule: Rule, note: String| AuditEntry {
            source_row: rec.source_row,
            action: Action::Dropped,
            rule: Some(rule),
            note,
        };
        let tc = match rec.critical_temp {
            None => {
                out.audit.push(drop(Rule::DropMissingTc, String::new()));
                continue;
            }
            Some(tc) if tc.is_nan() => {
                out.audit
                    .push(drop(Rule::DropMissingTc, "not a number".into()));
                continue;
            }
            Some(tc) if tc <= 0.0 => {
                out.audit.push(drop(Rule::DropZeroTc, format!("Tc = {tc}")));
                continue;
            }
            Some(tc) if tc > config.tc_ceiling => {
                out.audit.push(drop(
                    Rule::TcCeiling,
                    format!("Tc = {tc} exceeds {}", config.tc_ceiling),
                ));
                continue;
            }
            Some(tc) => tc,
        };

        let material = rec.material.trim();
        let normalized = normalize_oxygen_suffix(material);
        let modified = normalized != material;

        let composition = match parse_formula(&normalized) {
            Ok(c) => c,
            Err(issue) => {
                let rule = if issue.kind == IssueKind::NonPositiveCoefficient {
                    Rule::ZeroCoefficient
                } else {
                    Rule::ParseError
                };
                let mut note = format!("{normalized:?}: {issue}");
                if let Some(extra) = unnormalized_oxygen_note(&normalized) {
                    note.push_str("; ");
                    note.push_str(&extra);
                }
                out.audit.push(drop(rule, note));
                continue;
            }
        };

        if let Some(el) = composition.unsupported_element() {
            out.audit.push(drop(
                Rule::ZGt86,
                format!("contains {el} (Z = {})", el.atomic_number()),
            ));
            continue;
        }

        let key = (composition.to_string(), tc.to_bits());
        if !seen.insert(key) {
            out.audit.push(drop(
                Rule::Dedup,
                format!("duplicate of {} at Tc = {tc}", composition),
            ));
            continue;
        }

        out.audit.push(if modified {
            AuditEntry {
                source_row: rec.source_row,
                action: Action::Modified,
                rule: Some(Rule::OxygenSuffix),
                note: format!("{material:?} -> {normalized:?}"),
            }
        } else {
            AuditEntry {
                source_row: rec.source_row,
                action: Action::Kept,
                rule: None,
                note: String::new(),
            }
        });
        out.rows.push(CleanRow {
            composition,
            critical_temp: tc,
            source_row: rec.source_row,
        });
    }
    out
}

/// Result of reading a raw CSV: the records plus column names that were ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFile {
    pub records: Vec<RawRecord>,
    pub ignored_columns: Vec<String>,
}

/// Reads a CSV with `material` and `critical_temp` columns. Unparseable
/// temperatures are treated as missing.
pub fn read_raw_csv<R: Read>(reader: R) -> Result<RawFile, FileFormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(FileFormatError::MissingColumn(name))
    };
    let mat_idx = col("material")?;
    let tc_idx = col("critical_temp")?;
    let ignored_columns = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != mat_idx && *i != tc_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let tc_text = rec.get(tc_idx).unwrap_or("");
        records.push(RawRecord {
            material: rec.get(mat_idx).unwrap_or("").to_string(),
            critical_temp: tc_text.parse().ok(),
            source_row: i as u64 + 1,
        });
    }
    Ok(RawFile {
        records,
        ignored_columns,
    })
}

/// Writes `material,critical_temp` with canonical material strings.
pub fn write_clean_csv<W: Write>(dataset: &CleanDataset, writer: W) -> Result<(), FileFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["material", "critical_temp"])?;
    for row in &dataset.rows {
        w.write_record([row.composition.to_string(), row.critical_temp.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_audit_csv<W: Write>(audit: &[AuditEntry], writer: W) -> Result<(), FileFormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source_row", "action", "rule", "note"])?;
    for a in audit {
        w.write_record([
            a.source_row.to_string().as_str(),
            a.action.as_str(),
            a.rule.map_or("", Rule::id),
            a.note.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a cleaned dataset straight into rows. When the header has one
/// column per element H..Rn (the published `unique_m.csv` layout) the
/// composition comes from those columns; otherwise the `material` column
/// is parsed after oxygen-suffix normalization. Fails on the first bad row.
pub fn read_clean_csv<R: Read>(reader: R) -> Result<Vec<CleanRow>, CleanReadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(FileFormatError::from)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let tc_idx = find("critical_temp").ok_or(FileFormatError::MissingColumn("critical_temp"))?;
    let element_cols: Option<Vec<(Element, usize)>> = Element::supported()
        .map(|e| find(e.symbol()).map(|i| (e, i)))
        .collect();
    let mat_idx = find("material");
    if element_cols.is_none() && mat_idx.is_none() {
        return Err(FileFormatError::MissingColumn("material").into());
    }

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(FileFormatError::from)?;
        let row = i as u64 + 1;
        let bad = |reason: String| CleanReadError::Row { row, reason };
        let cell = |idx: usize| rec.get(idx).unwrap_or("");
        let composition = match &element_cols {
            Some(cols) => {
                let mut pairs = Vec::new();
                for &(e, idx) in cols {
                    let v: f64 = cell(idx).parse().map_err(|_| {
                        bad(format!("{}: {:?} is not a number", e.symbol(), cell(idx)))
                    })?;
                    if v != 0.0 {
                        pairs.push((e, v));
                    }
                }
                Composition::from_pairs(pairs)
                    .ok_or_else(|| bad("element columns do not form a valid composition".into()))?
            }
            None => {
                let raw = cell(mat_idx.expect("checked above"));
                let material = normalize_oxygen_suffix(raw);
                parse_formula(&material).map_err(|issue| bad(format!("{raw:?}: {issue}")))?
            }
        };
        let critical_temp = cell(tc_idx)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("critical_temp {:?} is not a number", cell(tc_idx))))?;
        out.push(CleanRow {
            composition,
            critical_temp,
            source_row: row,
        });
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum CleanReadError {
    #[error(transparent)]
    File(#[from] FileFormatError),
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(material: &str, tc: Option<f64>, row: u64) -> RawRecord {
        RawRecord {
            material: material.into(),
            critical_temp: tc,
            source_row: row,
        }
    }

    fn rule_of(ds: &CleanDataset, row: u64) -> Option<Rule> {
        ds.audit.iter().find(|a| a.source_row == row).unwrap().rule
    }

    #[test]
    fn oxygen_suffixes() {
        assert_eq!(normalize_oxygen_suffix("Y1Ba2Cu3O7-X"), "Y1Ba2Cu3O7");
        assert_eq!(normalize_oxygen_suffix("La2Cu1O5+X"), "La2Cu1O5");
        assert_eq!(normalize_oxygen_suffix("Y1Ba2Cu3O7-Z"), "Y1Ba2Cu3O7");
        assert_eq!(
            normalize_oxygen_suffix("Bi2Sr2Ca1Cu2O8.2+Z"),
            "Bi2Sr2Ca1Cu2O8.2"
        );
        assert_eq!(
            normalize_oxygen_suffix("Nd1.85Ce0.15Cu1O4"),
            "Nd1.85Ce0.15Cu1O4"
        );
        assert_eq!(
            normalize_oxygen_suffix("Y1Ba2Cu3O7-XF0.2"),
            "Y1Ba2Cu3O7F0.2"
        );
        // not an oxygen token
        assert_eq!(normalize_oxygen_suffix("Cu2-X"), "Cu2-X");
    }

    #[test]
    fn unrecognized_suffix_is_noted() {
        assert!(unnormalized_oxygen_note("Y1Ba2Cu3O7-d").is_some());
        assert!(unnormalized_oxygen_note("Y1Ba2Cu3O6.5-Y").is_some());
        assert!(unnormalized_oxygen_note("Y1Ba2Cu3O7").is_none());
    }

    #[test]
    fn rules_fire_with_ids() {
        let records = vec![
            rec("Nb1", Some(0.0), 1),
            rec("Nb1", None, 2),
            rec("La0.23Th0.77Pb3", Some(280.0), 3),
            rec("Y1Ba2Cu3O7-X", Some(92.0), 4),
            rec("Yo975Yb0.025Ba2Cu3O", Some(80.0), 5),
            rec("Y0.5Yb0.5Ba2Sr0Cu3O7", Some(80.0), 6),
            rec("U1Pt3", Some(0.5), 7),
            rec("Y1Ba2Cu3O7", Some(92.0), 8),
            rec("Y2C2Br0.5!1.5", Some(10.0), 9),
        ];
        let ds = clean(&records, &CleanConfig::default());
        assert_eq!(rule_of(&ds, 1), Some(Rule::DropZeroTc));
        assert_eq!(rule_of(&ds, 2), Some(Rule::DropMissingTc));
        assert_eq!(rule_of(&ds, 3), Some(Rule::TcCeiling));
        assert_eq!(rule_of(&ds, 4), Some(Rule::OxygenSuffix));
        assert_eq!(rule_of(&ds, 5), Some(Rule::ParseError));
        assert_eq!(rule_of(&ds, 6), Some(Rule::ZeroCoefficient));
        assert_eq!(rule_of(&ds, 7), Some(Rule::ZGt86));
        assert_eq!(rule_of(&ds, 8), Some(Rule::Dedup));
        assert_eq!(rule_of(&ds, 9), Some(Rule::ParseError));
        assert_eq!(ds.rows.len(), 1);
        assert_eq!(ds.rows[0].composition.to_string(), "Y1Ba2Cu3O7");
        assert_eq!(ds.audit.len(), records.len());
    }

    #[test]
    fn ceiling_is_configurable_and_inclusive() {
        let records = vec![
            rec("Hg1Ba2Ca2Cu3O8", Some(203.0), 1),
            rec("H3S1", Some(250.0), 2),
        ];
        let ds = clean(&records, &CleanConfig::default());
        assert_eq!(ds.rows.len(), 1);
        let ds = clean(&records, &CleanConfig { tc_ceiling: 300.0 });
        assert_eq!(ds.rows.len(), 2);
    }

    #[test]
    fn same_formula_different_tc_is_kept() {
        let records = vec![
            rec("Ba0.2La1.8Cu1O4", Some(30.0), 1),
            rec("Ba0.2La1.8CuO4", Some(30.0), 2),
            rec("Ba0.2La1.8Cu1O4", Some(27.5), 3),
        ];
        let ds = clean(&records, &CleanConfig::default());
        assert_eq!(ds.rows.len(), 2);
        assert_eq!(rule_of(&ds, 2), Some(Rule::Dedup));
    }

    #[test]
    fn csv_input_requires_columns() {
        let err = read_raw_csv("material,tc\nNb1,9\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            FileFormatError::MissingColumn("critical_temp")
        ));

        let raw =
            read_raw_csv("num,material,critical_temp\n1,Nb1,9.2\n2,Pb1,\n".as_bytes()).unwrap();
        assert_eq!(raw.ignored_columns, vec!["num".to_string()]);
        assert_eq!(raw.records[0].critical_temp, Some(9.2));
        assert_eq!(raw.records[1].critical_temp, None);
        assert_eq!(raw.records[1].source_row, 2);
    }

    #[test]
    fn clean_csv_round_trip() {
        let records = vec![
            rec("Ba0.2La1.8CuO4", Some(30.0), 1),
            rec("MgB2", Some(39.0), 2),
        ];
        let ds = clean(&records, &CleanConfig::default());
        let mut buf = Vec::new();
        write_clean_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "material,critical_temp\nBa0.2La1.8Cu1O4,30\nMg1B2,39\n"
        );
        let rows = read_clean_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].composition, ds.rows[1].composition);
    }

    #[test]
    fn element_column_layout() {
        let symbols: Vec<&str> = Element::supported().map(|e| e.symbol()).collect();
        let mut text = format!("{},critical_temp,material\n", symbols.join(","));
        let mut row = vec!["0"; 86];
        row[11] = "1";
        row[4] = "2";
        text += &format!("{},39,MgB2\n", row.join(","));
        let rows = read_clean_csv(text.as_bytes()).unwrap();
        let c = &rows[0].composition;
        assert_eq!(c.len(), 2);
        assert_eq!(
            c.coefficient(Element::from_symbol("Mg").unwrap()),
            Some(1.0)
        );
        assert_eq!(c.coefficient(Element::from_symbol("B").unwrap()), Some(2.0));
        assert_eq!(rows[0].critical_temp, 39.0);
    }

    #[test]
    fn clean_reader_normalizes_oxygen_suffix() {
        let rows =
            read_clean_csv("material,critical_temp\nBa0.2La1.8Cu1O4-Z,30\n".as_bytes()).unwrap();
        assert_eq!(rows[0].composition.to_string(), "Ba0.2La1.8Cu1O4");
        assert!(read_clean_csv("critical_temp\n3\n".as_bytes()).is_err());
    }
}
