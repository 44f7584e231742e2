//! Chemical formula parsing.
//!
//! The grammar is a strict left-to-right sequence of element tokens:
//! an uppercase letter, an optional lowercase letter, then an optional
//! plain decimal coefficient (default 1). Parentheses, hydrate dots,
//! charges and scientific notation are rejected. Repeated symbols have
//! their coefficients summed, keeping first-mention order.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Highest atomic number with elemental property data.
pub const MAX_SUPPORTED_Z: u8 = 86;

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// A chemical element, identified by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub fn from_atomic_number(z: u8) -> Option<Self> {
        (1..=118).contains(&z).then_some(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Option<Self> {
        SYMBOLS
            .iter()
            .position(|s| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    /// Elements beyond radon have no property row and are excluded from the pipeline.
    pub fn is_supported(self) -> bool {
        self.0 <= MAX_SUPPORTED_Z
    }

    /// All elements with property data, in atomic-number order.
    pub fn supported() -> impl Iterator<Item = Element> {
        (1..=MAX_SUPPORTED_Z).map(Element)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Element::from_symbol(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown element symbol {s:?}")))
    }
}

/// A parsed formula as (element, coefficient) pairs in first-mention order.
///
/// Entries are non-empty, unique by element, and every coefficient is
/// finite and strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    entries: Vec<(Element, f64)>,
}

impl Composition {
    /// Builds a composition from explicit pairs, summing repeats.
    ///
    /// Returns `None` when the list is empty or a coefficient is not a
    /// positive finite number.
    pub fn from_pairs<I>(pairs: I) -> Option<Self>
    where
        I: IntoIterator<Item = (Element, f64)>,
    {
        let mut entries: Vec<(Element, f64)> = Vec::new();
        for (el, c) in pairs {
            if !(c.is_finite() && c > 0.0) {
                return None;
            }
            match entries.iter_mut().find(|(e, _)| *e == el) {
                Some((_, acc)) => *acc += c,
                None => entries.push((el, c)),
            }
        }
        (!entries.is_empty()).then_some(Composition { entries })
    }

    pub fn entries(&self) -> &[(Element, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, el: Element) -> bool {
        self.entries.iter().any(|(e, _)| *e == el)
    }

    pub fn coefficient(&self, el: Element) -> Option<f64> {
        self.entries.iter().find(|(e, _)| *e == el).map(|(_, c)| *c)
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.entries.iter().map(|(e, _)| *e)
    }

    /// First element beyond the supported range, if any.
    pub fn unsupported_element(&self) -> Option<Element> {
        self.elements().find(|e| !e.is_supported())
    }

    /// Coefficients by atomic number: index `Z - 1` of a length-86 vector.
    pub fn composition_vector(&self) -> Result<Vec<f64>, OutOfRangeElement> {
        let mut v = vec![0.0; MAX_SUPPORTED_Z as usize];
        for &(el, c) in &self.entries {
            if !el.is_supported() {
                return Err(OutOfRangeElement(el));
            }
            v[el.atomic_number() as usize - 1] = c;
        }
        Ok(v)
    }
}

/// Canonical rendering: symbols in stored order, every coefficient written
/// out with the shortest round-trip decimal (`Re7Zr1`, `Ba0.2La1.8Cu1O4`).
impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (el, c) in &self.entries {
            write!(f, "{el}{c}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Composition {
    type Err = ParseIssue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("element {0} has atomic number above {MAX_SUPPORTED_Z}")]
pub struct OutOfRangeElement(pub Element);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IssueKind {
    UnknownSymbol,
    NonPositiveCoefficient,
    MalformedToken,
    EmptyFormula,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::UnknownSymbol => "UnknownSymbol",
            IssueKind::NonPositiveCoefficient => "NonPositiveCoefficient",
            IssueKind::MalformedToken => "MalformedToken",
            IssueKind::EmptyFormula => "EmptyFormula",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The first problem found while parsing. `span` is a byte range into the
/// input that always falls on character boundaries.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at {}..{}: {message}", span.start, span.end)]
pub struct ParseIssue {
    pub kind: IssueKind,
    pub span: Range<usize>,
    pub message: String,
}

impl ParseIssue {
    fn new(kind: IssueKind, span: Range<usize>, message: impl Into<String>) -> Self {
        ParseIssue {
            kind,
            span,
            message: message.into(),
        }
    }
}

/// Parses a formula such as `Ba0.2La1.8Cu1O4` into a [`Composition`].
pub fn parse_formula(input: &str) -> Result<Composition, ParseIssue> {
    let bytes = input.as_bytes();
    let mut pos = 0;
    let mut pairs: Vec<(Element, f64)> = Vec::new();

    while pos < bytes.len() {
        let b = bytes[pos];
        if b.is_ascii_lowercase() {
            let end = word_end(bytes, pos);
            return Err(ParseIssue::new(
                IssueKind::MalformedToken,
                pos..end,
                format!(
                    "{:?} is not an element symbol: symbols start with an uppercase letter",
                    &input[pos..end]
                ),
            ));
        }
        if !b.is_ascii_uppercase() {
            let end = pos + char_len(input, pos);
            let what = &input[pos..end];
            let message = if b.is_ascii_digit() || b == b'.' {
                format!("coefficient {what:?} is not attached to an element symbol")
            } else {
                format!("unexpected character {what:?}")
            };
            return Err(ParseIssue::new(
                IssueKind::MalformedToken,
                pos..end,
                message,
            ));
        }

        let sym_start = pos;
        pos += 1;
        if pos < bytes.len() && bytes[pos].is_ascii_lowercase() {
            pos += 1;
        }
        let symbol = &input[sym_start..pos];
        let element = Element::from_symbol(symbol).ok_or_else(|| {
            ParseIssue::new(
                IssueKind::UnknownSymbol,
                sym_start..pos,
                format!("unknown element symbol {symbol:?}"),
            )
        })?;

        if pos < bytes.len() && bytes[pos] == b'-' {
            let end = number_end(bytes, pos + 1);
            return Err(ParseIssue::new(
                IssueKind::NonPositiveCoefficient,
                pos..end.max(pos + 1),
                format!("negative coefficient for {symbol}"),
            ));
        }

        let num_start = pos;
        let num_end = number_end(bytes, pos);
        let coefficient = if num_end == num_start {
            1.0
        } else {
            let text = &input[num_start..num_end];
            if text.bytes().filter(|&c| c == b'.').count() > 1 || text == "." {
                return Err(ParseIssue::new(
                    IssueKind::MalformedToken,
                    num_start..num_end,
                    format!("malformed coefficient {text:?}"),
                ));
            }
            if num_end < bytes.len()
                && matches!(bytes[num_end], b'e' | b'E')
                && bytes
                    .get(num_end + 1)
                    .is_some_and(|c| c.is_ascii_digit() || matches!(c, b'+' | b'-'))
            {
                return Err(ParseIssue::new(
                    IssueKind::MalformedToken,
                    num_start..num_end + 1,
                    "scientific notation is not supported in coefficients",
                ));
            }
            let value: f64 = text.parse().map_err(|_| {
                ParseIssue::new(
                    IssueKind::MalformedToken,
                    num_start..num_end,
                    format!("malformed coefficient {text:?}"),
                )
            })?;
            if !value.is_finite() {
                return Err(ParseIssue::new(
                    IssueKind::MalformedToken,
                    num_start..num_end,
                    format!("coefficient {text:?} is out of range"),
                ));
            }
            if value <= 0.0 {
                return Err(ParseIssue::new(
                    IssueKind::NonPositiveCoefficient,
                    num_start..num_end,
                    format!("coefficient of {symbol} must be positive, found {text}"),
                ));
            }
            value
        };
        pos = num_end;
        pairs.push((element, coefficient));
    }

    Composition::from_pairs(pairs).ok_or_else(|| {
        ParseIssue::new(IssueKind::EmptyFormula, 0..input.len(), "no element tokens")
    })
}

fn number_end(bytes: &[u8], start: usize) -> usize {
    let mut end = start;
    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
        end += 1;
    }
    end
}

fn word_end(bytes: &[u8], start: usize) -> usize {
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_lowercase() {
        end += 1;
    }
    end
}

fn char_len(s: &str, pos: usize) -> usize {
    s[pos..].chars().next().map_or(1, char::len_utf8)
}
