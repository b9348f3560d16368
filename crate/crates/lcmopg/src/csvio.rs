//! Plain numeric CSV: one header line, then rows of `f64` values.
//!
//! Every exported table in this crate (metrics, Pareto fronts, oracle
//! output) is a rectangular matrix of finite floats with simple
//! identifier-style column names, so no quoting or escaping is needed.
//! Values are written with Rust's shortest-round-trip float formatting;
//! reading a written file reproduces the values bit for bit.

use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

/// A parsed numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn check_rectangular(header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if header.is_empty() {
        return Err(Error::contract("CSV needs at least one column"));
    }
    for name in header {
        if name.is_empty() || name.contains(',') || name.contains('\n') {
            return Err(Error::contract(format!(
                "column name {name:?} must be non-empty and free of commas/newlines"
            )));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::contract(format!(
                "row {i} has {} values but the header names {} columns",
                row.len(),
                header.len()
            )));
        }
    }
    Ok(())
}

/// Render a table to CSV text.
pub fn to_csv_string(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    check_rectangular(header, rows)?;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Shortest representation that parses back to the identical bits.
fn format_f64(v: f64) -> String {
    // `{}` on f64 is guaranteed round-trip-exact for finite values; NaN and
    // the infinities print as NaN/inf/-inf, which `f64::from_str` accepts.
    format!("{v}")
}

/// Write a table to `path`.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, to_csv_string(header, rows)?)?;
    Ok(())
}

/// Parse CSV text produced by [`to_csv_string`] (or any comma-separated
/// numeric table with a header line).
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse("CSV is empty (no header line)".into()))?;
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err(Error::Parse("CSV header has an empty column name".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "line {}: {cell:?} is not a number",
                        lineno + 2
                    ))
                })
            })
            .collect();
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {}: {} values but {} columns",
                lineno + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// Read a table from `path`.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    parse_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::{derive_stream, StreamKind};
    use rand::Rng;

    fn headers(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = derive_stream(43, StreamKind::Misc, 0, 0);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                (0..4)
                    .map(|_| (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-12..12)))
                    .collect()
            })
            .collect();
        let header = headers(&["a", "b", "c", "d"]);
        let text = to_csv_string(&header, &rows).unwrap();
        let table = parse_csv(&text).unwrap();
        assert_eq!(table.header, header);
        assert_eq!(table.rows.len(), rows.len());
        for (ours, theirs) in rows.iter().zip(&table.rows) {
            for (a, b) in ours.iter().zip(theirs) {
                assert_eq!(a.to_bits(), b.to_bits(), "{a} reparsed as {b}");
            }
        }
    }

    #[test]
    fn edge_values_round_trip() {
        let rows = vec![vec![
            0.0,
            -0.0,
            f64::MIN_POSITIVE / 4.0,
            f64::MAX,
            -1e-300,
            241.73,
        ]];
        let header = headers(&["a", "b", "c", "d", "e", "f"]);
        let text = to_csv_string(&header, &rows).unwrap();
        let table = parse_csv(&text).unwrap();
        for (a, b) in rows[0].iter().zip(&table.rows[0]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("lcmopg-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.csv");
        let header = headers(&["x", "y"]);
        let rows = vec![vec![1.5, -2.25], vec![0.1, 1e18]];
        write_csv(&path, &header, &rows).unwrap();
        let table = read_csv(&path).unwrap();
        assert_eq!(table, CsvTable { header, rows });
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn rejects_ragged_and_malformed_input() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n1.0\n").is_err());
        assert!(parse_csv("a,b\n1.0,2.0,3.0\n").is_err());
        assert!(parse_csv("a,b\n1.0,hello\n").is_err());
        assert!(parse_csv("a,\n1.0,2.0\n").is_err());
        assert!(parse_csv("a,b\n1.0,2.0\n").is_ok());
    }

    #[test]
    fn write_rejects_ragged_rows_and_bad_names() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(to_csv_string(&headers(&["a", "b"]), &rows).is_err());
        assert!(to_csv_string(&headers(&["a,b"]), &[vec![1.0]]).is_err());
        assert!(to_csv_string(&[], &[]).is_err());
    }

    #[test]
    fn header_only_table_is_valid() {
        let text = to_csv_string(&headers(&["only"]), &[]).unwrap();
        let table = parse_csv(&text).unwrap();
        assert!(table.rows.is_empty());
        assert_eq!(table.header, vec!["only".to_string()]);
    }

    #[test]
    fn blank_lines_are_skipped() {
        let table = parse_csv("a,b\n1,2\n\n3,4\n").unwrap();
        assert_eq!(table.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
