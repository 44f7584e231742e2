use std::io::Write;

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(usize),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl Cell {
    fn render(&self, format: Format) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if v.is_nan() => "NA".into(),
            Cell::Num(v) => match format {
                Format::Csv => v.to_string(),
                Format::Table => trim_fixed(*v, 4),
            },
        }
    }
}

/// `{:.digits}` without trailing zeros, keeping at least one digit.
fn trim_fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    if !s.contains('.') {
        return s;
    }
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, format: Format, mut w: W) -> std::io::Result<()> {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.render(format)).collect())
            .collect();
        match format {
            Format::Csv => {
                let mut cw = csv::Writer::from_writer(w);
                cw.write_record(&self.header)?;
                for r in &cells {
                    cw.write_record(r)?;
                }
                cw.flush()
            }
            Format::Table => {
                let mut width: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
                for r in &cells {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let line = |w: &mut W, r: &[String]| -> std::io::Result<()> {
                    let mut s = String::new();
                    for (i, (c, n)) in r.iter().zip(&width).enumerate() {
                        if i > 0 {
                            s.push_str("  ");
                        }
                        s.push_str(&format!("{c:<n$}"));
                    }
                    writeln!(w, "{}", s.trim_end())
                };
                line(&mut w, &self.header)?;
                for r in &cells {
                    line(&mut w, r)?;
                }
                Ok(())
            }
        }
    }
}
