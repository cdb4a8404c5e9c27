//! Comma-separated tables for profiles and embeddings.
//!
//! Each row starts with the label, followed by the values. Floats are
//! written in their shortest round-trip form so a table reads back to the
//! same bits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) {
        return Err(Error::Invalid(format!("label {label:?} cannot be written to a table")));
    }
    Ok(())
}

fn render(header: &[String], rows: &[(&str, &[f64])]) -> Result<String> {
    let mut s = header.join(",");
    s.push('\n');
    for (label, values) in rows {
        check_label(label)?;
        s.push_str(label);
        for v in values.iter() {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    Ok(s)
}

/// Profile table with header `label,l0e0,l0e1,...`.
pub fn profiles_csv(labels: &[String], profiles: &[Vec<f64>], num_experts: usize) -> Result<String> {
    let width = profiles.first().map_or(0, Vec::len);
    if profiles.iter().any(|p| p.len() != width) || num_experts == 0 || width % num_experts != 0 {
        return Err(Error::Shape("profiles must share a length divisible by the expert count".into()));
    }
    let mut header = vec!["label".to_string()];
    header.extend((0..width).map(|i| format!("l{}e{}", i / num_experts, i % num_experts)));
    let rows: Vec<(&str, &[f64])> = labels.iter().map(String::as_str).zip(profiles.iter().map(Vec::as_slice)).collect();
    render(&header, &rows)
}

/// Embedding table with header `label,x,y,z`.
pub fn embedding_csv(labels: &[String], coords: &[[f64; 3]]) -> Result<String> {
    let header = ["label", "x", "y", "z"].map(String::from);
    let rows: Vec<(&str, &[f64])> = labels.iter().map(String::as_str).zip(coords.iter().map(|c| &c[..])).collect();
    render(&header, &rows)
}

/// Reads a table written by either function above.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let width = header.split(',').count() - 1;
    let (mut labels, mut rows) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(bad(format!("row {} has {} values, expected {width}", i + 1, values.len())));
        }
        labels.push(label);
        rows.push(values);
    }
    Ok((labels, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let labels = vec!["math".to_string(), "protein".to_string()];
        let profiles = vec![vec![0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0], vec![0.5, 0.5, 1e-300, 1.0]];
        let path = dir.path().join("p.csv");
        std::fs::write(&path, profiles_csv(&labels, &profiles, 2).unwrap()).unwrap();
        let (l, p) = read_table(&path).unwrap();
        assert_eq!((l, p), (labels, profiles));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,l0e0,l0e1,l1e0,l1e1\n"));
    }

    #[test]
    fn commas_in_labels_are_rejected() {
        assert!(embedding_csv(&["a,b".into()], &[[0.0; 3]]).is_err());
    }
}
