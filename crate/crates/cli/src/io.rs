//! Matrix CSV files and number formatting.

use std::fs;
use std::path::Path;

use expvar_core::report::{format_sig, round_sig, OUTPUT_DIGITS};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::CliError;

/// Reads a headerless, comma-separated matrix, one row per line.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let what = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{what}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{what}: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Input(format!("{what}: row {}, column {}: '{field}' is not a number", i + 1, j + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(CliError::Input(format!("{what}: empty matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|&x| format_sig(x)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn num(x: f64) -> Value {
    json!(round_sig(x, OUTPUT_DIGITS))
}

pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| Value::Array(row.iter().map(|&x| num(x)).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    text
}

/// Writes `text` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_scientific_notation_and_spaces() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1, 2.5e0\n-3E-1,4").unwrap();
        let m = read_matrix(f.path()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.5, -0.3, 4.0]));
    }

    #[test]
    fn rejects_ragged_and_non_numeric_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1,2\n3").unwrap();
        assert!(read_matrix(f.path()).is_err());
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "1,x").unwrap();
        assert!(read_matrix(g.path()).unwrap_err().to_string().contains("'x' is not a number"));
    }

    #[test]
    fn csv_round_trip_at_twelve_digits() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0 / 3.0, 2.0]);
        assert_eq!(matrix_csv(&m), "0.333333333333,2\n");
    }
}
