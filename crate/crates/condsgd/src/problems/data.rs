//! Synthetic classification data and the on-disk dataset cache.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, ProblemError, Result};
use crate::linalg::{dot, norm2};
use crate::Matrix64;

/// Generates a standardized logistic classification problem: i.i.d. standard
/// normal features (column-standardized), a true weight vector drawn
/// uniformly on the sphere of radius 2, and Bernoulli(π) labels.
/// Deterministic for a fixed seed.
pub fn generate_classification_data(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(ProblemError::Ingest("n and d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Matrix64::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    standardize_columns(&mut features);

    let mut w_true: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = norm2(&w_true).max(f64::MIN_POSITIVE);
    for w in &mut w_true {
        *w *= 2.0 / norm;
    }

    let labels: Vec<f64> = (0..n)
        .map(|i| {
            let p = 1.0 / (1.0 + (-dot(features.row(i), &w_true)).exp());
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::new(features, labels, format!("synthetic-n{n}-d{d}-s{seed}"))
}

/// Per-column mean 0, variance 1 (columns with zero variance are left
/// centered only).
pub fn standardize_columns(m: &mut Matrix64) {
    let (n, d) = (m.rows(), m.cols());
    for j in 0..d {
        let mean: f64 = (0..n).map(|i| m[(i, j)]).sum::<f64>() / n as f64;
        let var: f64 = (0..n).map(|i| (m[(i, j)] - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for i in 0..n {
            m[(i, j)] = (m[(i, j)] - mean) * scale;
        }
    }
}

/// Writes the dataset cache: features in the plain-text matrix format plus a
/// label file (one label per line).
pub fn write_dataset_cache(data: &Dataset, features_path: &Path, labels_path: &Path) -> Result<()> {
    data.features.write_text(features_path)?;
    let labels: String = data
        .labels
        .iter()
        .map(|y| format!("{y}\n"))
        .collect();
    std::fs::write(labels_path, labels)?;
    Ok(())
}

pub fn load_dataset_cache(
    features_path: &Path,
    labels_path: &Path,
    name: impl Into<String>,
) -> Result<Dataset> {
    let features = Matrix64::read_text(features_path)?;
    let labels: Vec<f64> = std::fs::read_to_string(labels_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| ProblemError::Ingest(format!("bad label line {l:?}")))
        })
        .collect::<Result<_>>()?;
    Dataset::new(features, labels, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_classification_data(200, 5, 7).unwrap();
        let b = generate_classification_data(200, 5, 7).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn labels_are_binary_and_balanced_enough() {
        let data = generate_classification_data(1500, 25, 7).unwrap();
        assert!(data.labels.iter().all(|&y| y == 0.0 || y == 1.0));
        let mean: f64 = data.labels.iter().sum::<f64>() / data.n() as f64;
        assert!(mean > 0.2 && mean < 0.8, "label mean {mean}");
    }

    #[test]
    fn columns_are_standardized() {
        let data = generate_classification_data(500, 4, 3).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = (0..500).map(|i| data.features[(i, j)]).collect();
            let mean: f64 = col.iter().sum::<f64>() / 500.0;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_classification_data(50, 3, 1).unwrap();
        let fpath = dir.path().join("features.txt");
        let lpath = dir.path().join("labels.txt");
        write_dataset_cache(&data, &fpath, &lpath).unwrap();
        let back = load_dataset_cache(&fpath, &lpath, "back").unwrap();
        assert_eq!(back.features, data.features);
        assert_eq!(back.labels, data.labels);
    }
}
