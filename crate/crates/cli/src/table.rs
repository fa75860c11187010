//! Comma-separated tables: one header row, `.` decimals, 17 significant
//! digits, newline-terminated rows.

use std::path::Path;

use crate::error::{io_err, CliError};

/// Shortest form that round-trips is not stable across formatters, so every
/// float is written with exactly 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for r in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("cells are UTF-8")
    }

    pub fn parse(text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        if !path.is_file() {
            return Err(CliError::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
            .map_err(|e| CliError::Config(format!("malformed table {}: {e}", path.display())))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column; empty and unparsable cells become NaN.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        match self.column(name) {
            Some(k) => self
                .rows
                .iter()
                .map(|r| r.get(k).and_then(|c| c.parse().ok()).unwrap_or(f64::NAN))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn strings(&self, name: &str) -> Vec<String> {
        match self.column(name) {
            Some(k) => self
                .rows
                .iter()
                .map(|r| r.get(k).cloned().unwrap_or_default())
                .collect(),
            None => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -2.3, 1.0 / 3.0, 6.02e23, 1e-300, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s
                .split('e')
                .next()
                .unwrap()
                .trim_start_matches('-')
                .replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn render_parse_round_trip() {
        let mut t = Table::new(&["alpha", "stability"]);
        t.push(vec![num(0.5), "stable".into()]);
        t.push(vec![num(1.0), "a; b, c".into()]);
        let text = t.render();
        assert!(text.ends_with('\n'));
        let back = Table::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("alpha"), vec![0.5, 1.0]);
    }
}
