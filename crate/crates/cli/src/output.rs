//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use crate::error::CliError;

const SIGNIFICANT: usize = 12;

/// Formats `x` with 12 significant digits, trailing zeros trimmed; plain
/// notation for exponents in `[-5, 12)`, scientific otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT as i32).contains(&exp) {
        let decimals = (SIGNIFICANT as i32 - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Column-major table; every column must have the same length.
pub struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self {
            header: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn col(mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        self.header.push(name.into());
        self.columns.push(values.into_iter().collect());
        self
    }

    pub fn index(self, name: &str, n: usize) -> Self {
        self.col(name, (0..n).map(|i| i as f64))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let rows = self.columns.first().map_or(0, Vec::len);
        assert!(self.columns.iter().all(|c| c.len() == rows), "ragged table");
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in 0..rows {
            w.write_record(self.columns.iter().map(|c| fmt_num(c[r])))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Default for Table {
    fn default() -> Self {
        Self::new()
    }
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Reads the `price` column of a CSV (for example a single-zone plan).
pub fn read_prices(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let col = r
        .headers()?
        .iter()
        .position(|h| h.trim() == "price")
        .ok_or_else(|| CliError::Parse(format!("{}: no 'price' column", path.display())))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let cell = rec.get(col).unwrap_or("").trim();
            cell.parse::<f64>()
                .map_err(|_| CliError::Parse(format!("{}: row {}: bad price '{cell}'", path.display(), i + 1)))
        })
        .collect()
}
