//! CSV interchange for fields and data vectors.
//!
//! Fields: `n` lines of `m` comma-separated values, line `i` = mesh row `i`.
//! Data vectors: header `index,value`, then one row per entry. Values are
//! written in shortest round-trip form, so reading back is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{BoundaryVector, Field};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_value(tok: &str, what: &'static str, path: &Path, line: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|e| Error::Parse {
        what,
        path: path.to_owned(),
        message: format!("line {line}: `{}`: {e}", tok.trim()),
    })
}

pub fn field_to_csv(f: &Field) -> String {
    let mut out = String::with_capacity(f.rows() * f.cols() * 20);
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", f.get(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_field_csv(text: &str, path: &Path) -> Result<Field> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            data.push(parse_value(tok, "field CSV", path, lineno + 1)?);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    what: "field CSV",
                    path: path.to_owned(),
                    message: format!("line {} has {width} values, expected {c}", lineno + 1),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse { what: "field CSV", path: path.to_owned(), message: "empty".into() })?;
    Field::from_vec(rows, cols, data)
}

pub fn read_field_csv(path: &Path) -> Result<Field> {
    parse_field_csv(&read_text(path)?, path)
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    write_text(path, &field_to_csv(f))
}

pub fn boundary_to_csv(d: &BoundaryVector) -> String {
    let mut out = String::from("index,value\n");
    for (k, v) in d.as_slice().iter().enumerate() {
        writeln!(out, "{k},{v}").unwrap();
    }
    out
}

pub fn read_boundary_csv(path: &Path) -> Result<BoundaryVector> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("index")) {
            continue;
        }
        let (idx, val) = line.split_once(',').ok_or_else(|| Error::Parse {
            what: "boundary CSV",
            path: path.to_owned(),
            message: format!("line {}: expected `index,value`", lineno + 1),
        })?;
        if idx.trim().parse::<usize>().ok() != Some(values.len()) {
            return Err(Error::Parse {
                what: "boundary CSV",
                path: path.to_owned(),
                message: format!("line {}: index `{}` out of sequence", lineno + 1, idx.trim()),
            });
        }
        values.push(parse_value(val, "boundary CSV", path, lineno + 1)?);
    }
    Ok(BoundaryVector(values))
}

pub fn write_boundary_csv(path: &Path, d: &BoundaryVector) -> Result<()> {
    write_text(path, &boundary_to_csv(d))
}

/// Fixed scientific notation with 17 significant digits.
pub(crate) fn sci(v: f64) -> String {
    format!("{v:.16e}")
}
