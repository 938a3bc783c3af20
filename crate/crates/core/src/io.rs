//! Plain-text output: `%.12e` numbers, `#` comment headers, comma separated
//! columns.

use std::io::{self, Write};

use crate::particle::Diagnostics;

pub const DIAGNOSTICS_COLUMNS: [&str; 8] = ["t", "sigma", "xi_minus", "xi_plus", "energy", "dissipation", "mean_x", "ell"];
pub const SNAPSHOT_COLUMNS: [&str; 2] = ["p", "x"];

/// Formats like C's `%.12e`: twelve mantissa digits and a signed exponent of
/// at least two digits.
pub fn fmt_e(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Writes each header line prefixed by `# `, then the column line.
pub fn write_header<W: Write>(w: &mut W, header: &[String], columns: &[&str]) -> io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{}", columns.join(","))
}

pub fn write_row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = values.iter().map(|&v| fmt_e(v)).collect();
    writeln!(w, "{}", cells.join(","))
}

pub fn write_diagnostics<W: Write>(w: &mut W, header: &[String], rows: &[Diagnostics]) -> io::Result<()> {
    write_header(w, header, &DIAGNOSTICS_COLUMNS)?;
    for d in rows {
        write_row(w, &[d.t, d.sigma, d.xi_minus, d.xi_plus, d.energy, d.dissipation, d.mean_x, d.ell])?;
    }
    Ok(())
}

/// Snapshot file: the `t=` line comes first, followed by the other header
/// lines.
pub fn write_snapshot<W: Write>(w: &mut W, header: &[String], t: f64, pgrid: &[f64], x: &[f64]) -> io::Result<()> {
    writeln!(w, "# t={}", fmt_e(t))?;
    write_header(w, header, &SNAPSHOT_COLUMNS)?;
    for (&p, &xv) in pgrid.iter().zip(x) {
        write_row(w, &[p, xv])?;
    }
    Ok(())
}

/// A parsed text table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table, String> {
        let mut header = Vec::new();
        let mut lines = text.lines();
        let columns = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => {
                    header.push(l.trim_start_matches('#').trim_start().to_string())
                }
                Some(l) => break l.split(',').map(str::to_string).collect::<Vec<_>>(),
                None => return Err("missing column line".into()),
            }
        };
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            if cells.len() != columns.len() {
                return Err(format!("row {i} has {} cells, expected {}", cells.len(), columns.len()));
            }
            rows.push(cells);
        }
        Ok(Table { header, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].parse().ok()).collect()
    }
}
