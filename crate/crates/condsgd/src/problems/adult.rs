//! Adult Income CSV ingestion.
//!
//! Comma-separated rows, optional header auto-detected by a non-numeric
//! first line, missing-value token "?" (rows containing it are dropped).
//! Categorical columns get ordinal integer codes in first-appearance order,
//! all feature columns are standardized, and the last column becomes the
//! binary income label (">50K" → 1). On the canonical combined file this
//! yields n = 45 222, d = 14.

use std::collections::HashMap;
use std::path::Path;

use super::data::standardize_columns;
use super::{Dataset, ProblemError, Result};
use crate::Matrix64;

pub fn load_adult_income(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ProblemError::Ingest(format!("cannot open {}: {e}", path.display())))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ProblemError::Ingest(format!("csv error: {e}")))?;
        let fields: Vec<String> = record.iter().map(|s| s.trim().to_string()).collect();
        if fields.is_empty() || (fields.len() == 1 && fields[0].is_empty()) {
            continue;
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(ProblemError::Ingest("no data rows in file".into()));
    }

    // header detection: a line where no field parses as a number
    if rows[0].iter().all(|f| f.parse::<f64>().is_err()) && looks_like_header(&rows) {
        rows.remove(0);
    }
    if rows.is_empty() {
        return Err(ProblemError::Ingest("file contains only a header".into()));
    }

    let width = rows[0].len();
    if width < 2 {
        return Err(ProblemError::Ingest(format!(
            "need at least 2 columns (features + label), got {width}"
        )));
    }
    // drop incomplete rows: wrong width or the Adult missing-value token
    rows.retain(|r| r.len() == width && r.iter().all(|f| f != "?"));
    if rows.is_empty() {
        return Err(ProblemError::Ingest("all rows incomplete or missing-valued".into()));
    }

    let n = rows.len();
    let d = width - 1;
    let numeric: Vec<bool> = (0..d)
        .map(|j| rows.iter().all(|r| r[j].parse::<f64>().is_ok()))
        .collect();

    let mut codes: Vec<HashMap<String, f64>> = vec![HashMap::new(); d];
    let mut features = Matrix64::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..d {
            features[(i, j)] = if numeric[j] {
                row[j].parse().expect("checked numeric")
            } else {
                let next = codes[j].len() as f64;
                *codes[j].entry(row[j].clone()).or_insert(next)
            };
        }
    }
    standardize_columns(&mut features);

    let labels: Vec<f64> = rows
        .iter()
        .map(|r| {
            let raw = r[d].trim_end_matches('.');
            if raw.contains(">50K") {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    Dataset::new(features, labels, "adult-income")
}

// A real header repeats no data-ish tokens; the Adult data line starts with
// a numeric age, so it never looks like a header. Guard against single-row
// all-categorical files being eaten as headers: only treat the first line
// as a header when more rows follow.
fn looks_like_header(rows: &[Vec<String>]) -> bool {
    rows.len() > 1
}
