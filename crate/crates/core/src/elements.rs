//! Elemental property table for H through Rn.
//!
//! The table ships as a CSV compiled into the crate. Imputation (La/Ce
//! covalent radii, the +1.5 electron-affinity shift) happens when the file
//! is curated; loading only checks that the result is complete and sane.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::formula::Element;

pub const DEFAULT_TABLE_CSV: &str = include_str!("../data/elements.csv");

pub const COLUMNS: [&str; 9] = [
    "symbol",
    "atomic_mass",
    "fie",
    "atomic_radius",
    "density",
    "electron_affinity",
    "fusion_heat",
    "thermal_conductivity",
    "valence",
];

/// Smallest electron affinity a shifted table can contain.
pub const ELECTRON_AFFINITY_SHIFT: f64 = 1.5;

/// The eight per-element properties used to build features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    AtomicMass,
    Fie,
    AtomicRadius,
    Density,
    ElectronAffinity,
    FusionHeat,
    ThermalConductivity,
    Valence,
}

impl Property {
    pub const ALL: [Property; 8] = [
        Property::AtomicMass,
        Property::Fie,
        Property::AtomicRadius,
        Property::Density,
        Property::ElectronAffinity,
        Property::FusionHeat,
        Property::ThermalConductivity,
        Property::Valence,
    ];

    /// Suffix used in feature names, e.g. `range_ThermalConductivity`.
    pub fn feature_suffix(self) -> &'static str {
        match self {
            Property::AtomicMass => "atomic_mass",
            Property::Fie => "fie",
            Property::AtomicRadius => "atomic_radius",
            Property::Density => "Density",
            Property::ElectronAffinity => "ElectronAffinity",
            Property::FusionHeat => "FusionHeat",
            Property::ThermalConductivity => "ThermalConductivity",
            Property::Valence => "Valence",
        }
    }

    /// Column name in the data file.
    pub fn column(self) -> &'static str {
        COLUMNS[self as usize + 1]
    }

    pub fn unit(self) -> &'static str {
        match self {
            Property::AtomicMass => "AMU",
            Property::Fie => "kJ/mol",
            Property::AtomicRadius => "pm",
            Property::Density => "kg/m^3",
            Property::ElectronAffinity => "kJ/mol",
            Property::FusionHeat => "kJ/mol",
            Property::ThermalConductivity => "W/(m K)",
            Property::Valence => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementProperties {
    pub atomic_mass: f64,
    pub fie: f64,
    pub atomic_radius: f64,
    pub density: f64,
    /// Stored with the +1.5 shift already applied.
    pub electron_affinity: f64,
    pub fusion_heat: f64,
    pub thermal_conductivity: f64,
    pub valence: f64,
}

impl ElementProperties {
    pub fn get(&self, p: Property) -> f64 {
        match p {
            Property::AtomicMass => self.atomic_mass,
            Property::Fie => self.fie,
            Property::AtomicRadius => self.atomic_radius,
            Property::Density => self.density,
            Property::ElectronAffinity => self.electron_affinity,
            Property::FusionHeat => self.fusion_heat,
            Property::ThermalConductivity => self.thermal_conductivity,
            Property::Valence => self.valence,
        }
    }

    fn from_values(v: [f64; 8]) -> Self {
        ElementProperties {
            atomic_mass: v[0],
            fie: v[1],
            atomic_radius: v[2],
            density: v[3],
            electron_affinity: v[4],
            fusion_heat: v[5],
            thermal_conductivity: v[6],
            valence: v[7],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ElementsError {
    #[error("missing value for {column} of {symbol} (line {line})")]
    MissingValue {
        symbol: String,
        column: &'static str,
        line: u64,
    },
    #[error("bad schema: {0}")]
    BadSchema(String),
    #[error("unknown element {0:?}: the table covers H through Rn")]
    UnknownElement(String),
    #[error("invalid value for {column} of {symbol}: {reason}")]
    InvalidValue {
        symbol: String,
        column: &'static str,
        reason: String,
    },
    #[error("cannot read element table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed element table: {0}")]
    Csv(#[from] csv::Error),
}

/// Immutable property table with one row per element H..Rn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyTable {
    version: String,
    provenance: BTreeMap<String, String>,
    rows: Vec<ElementProperties>,
}

impl PropertyTable {
    /// The table compiled into the crate.
    pub fn builtin() -> &'static PropertyTable {
        static TABLE: std::sync::OnceLock<PropertyTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            PropertyTable::from_csv_str(DEFAULT_TABLE_CSV).expect("bundled element table is valid")
        })
    }

    pub fn load(path: &Path) -> Result<PropertyTable, ElementsError> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_csv_str(&text)
    }

    /// Parses the CSV format: optional `# key: value` comment lines, the
    /// fixed header, then exactly 86 rows.
    pub fn from_csv_str(text: &str) -> Result<PropertyTable, ElementsError> {
        let mut version = String::from("unversioned");
        let mut provenance = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(v) = body.strip_prefix("version:") {
                version = v.trim().to_string();
            } else if let Some(rest) = body.strip_prefix("provenance ") {
                if let Some((col, note)) = rest.split_once(':') {
                    provenance.insert(col.trim().to_string(), note.trim().to_string());
                }
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(COLUMNS.iter().copied()) {
            return Err(ElementsError::BadSchema(format!(
                "expected header {:?}, found {:?}",
                COLUMNS.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut rows: Vec<Option<ElementProperties>> = vec![None; Element::supported().count()];
        let mut n_rows = 0usize;
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            n_rows += 1;
            let symbol = record.get(0).unwrap_or("").to_string();
            let element = Element::from_symbol(&symbol)
                .filter(|e| e.is_supported())
                .ok_or_else(|| ElementsError::UnknownElement(symbol.clone()))?;
            let mut values = [0.0; 8];
            for (i, slot) in values.iter_mut().enumerate() {
                let column = COLUMNS[i + 1];
                let cell = record.get(i + 1).unwrap_or("");
                if cell.is_empty() {
                    return Err(ElementsError::MissingValue {
                        symbol,
                        column,
                        line,
                    });
                }
                *slot = cell.parse().map_err(|_| ElementsError::InvalidValue {
                    symbol: symbol.clone(),
                    column,
                    reason: format!("{cell:?} is not a number"),
                })?;
            }
            let props = ElementProperties::from_values(values);
            check_row(&symbol, &props)?;
            let slot = &mut rows[element.atomic_number() as usize - 1];
            if slot.is_some() {
                return Err(ElementsError::BadSchema(format!(
                    "duplicate row for {symbol}"
                )));
            }
            *slot = Some(props);
        }

        if n_rows != rows.len() {
            return Err(ElementsError::BadSchema(format!(
                "expected {} rows, found {n_rows}",
                rows.len()
            )));
        }
        let rows = rows
            .into_iter()
            .map(|r| r.expect("all 86 rows present"))
            .collect();
        Ok(PropertyTable {
            version,
            provenance,
            rows,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn provenance(&self, p: Property) -> Option<&str> {
        self.provenance.get(p.column()).map(String::as_str)
    }

    pub fn lookup(&self, element: Element) -> Result<&ElementProperties, ElementsError> {
        if !element.is_supported() {
            return Err(ElementsError::UnknownElement(element.symbol().to_string()));
        }
        Ok(&self.rows[element.atomic_number() as usize - 1])
    }

    pub fn lookup_symbol(&self, symbol: &str) -> Result<&ElementProperties, ElementsError> {
        let el = Element::from_symbol(symbol)
            .ok_or_else(|| ElementsError::UnknownElement(symbol.to_string()))?;
        self.lookup(el)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Element, &ElementProperties)> {
        Element::supported().zip(self.rows.iter())
    }

    /// Serializes back to the CSV format accepted by [`Self::from_csv_str`].
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# version: {}\n", self.version);
        for (col, note) in &self.provenance {
            out.push_str(&format!("# provenance {col}: {note}\n"));
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for (el, p) in self.iter() {
            out.push_str(el.symbol());
            for prop in Property::ALL {
                out.push_str(&format!(",{}", p.get(prop)));
            }
            out.push('\n');
        }
        out
    }
}

fn check_row(symbol: &str, p: &ElementProperties) -> Result<(), ElementsError> {
    for prop in Property::ALL {
        let v = p.get(prop);
        let invalid = |reason: String| ElementsError::InvalidValue {
            symbol: symbol.to_string(),
            column: prop.column(),
            reason,
        };
        if !v.is_finite() {
            return Err(invalid(format!("{v} is not finite")));
        }
        if v <= 0.0 {
            return Err(invalid(format!("{v} must be positive")));
        }
    }
    if p.electron_affinity < ELECTRON_AFFINITY_SHIFT {
        return Err(ElementsError::InvalidValue {
            symbol: symbol.to_string(),
            column: "electron_affinity",
            reason: format!(
                "{} is below {ELECTRON_AFFINITY_SHIFT}: the shift has not been applied",
                p.electron_affinity
            ),
        });
    }
    if p.valence.fract() != 0.0 {
        return Err(ElementsError::InvalidValue {
            symbol: symbol.to_string(),
            column: "valence",
            reason: format!("{} is not an integer", p.valence),
        });
    }
    Ok(())
}
