use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::CliError;

/// One CSV cell.
pub enum Cell {
    Int(i64),
    Float(f64),
    Opt(Option<f64>),
    Bool(bool),
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Opt(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

/// 17 significant digits in scientific notation, so output is byte-stable.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Opt(v) => v.map(format_float).unwrap_or_default(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

pub struct CsvOut {
    inner: BufWriter<Box<dyn Write>>,
    width: usize,
}

fn io_err(e: io::Error) -> CliError {
    CliError::Internal(format!("write failed: {e}"))
}

impl CsvOut {
    pub fn open(path: Option<&Path>, header: &[&str]) -> Result<Self, CliError> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(
                File::create(p)
                    .map_err(|e| CliError::Input(format!("--out {}: {e}", p.display())))?,
            ),
            None => Box::new(io::stdout().lock()),
        };
        let mut out = Self {
            inner: BufWriter::new(sink),
            width: header.len(),
        };
        writeln!(out.inner, "{}", header.join(",")).map_err(io_err)?;
        Ok(out)
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.width);
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        writeln!(self.inner, "{}", line.join(",")).map_err(io_err)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(io_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(Cell::Opt(None).render(), "");
    }
}
