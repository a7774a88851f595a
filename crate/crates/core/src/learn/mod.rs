//! Classifiers trained from scratch: histogram gradient-boosted trees and a
//! small multilayer perceptron. Inputs are row-major feature rows with class
//! indices in `0..n_classes`.

pub mod gbdt;
pub mod mlp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gbdt::{predict_gbdt, train_gbdt, GbdtConfig, GbdtModel, GbdtProfile};
pub use mlp::{grad_check, train_mlp, train_mlp_from, train_mlp_with_validation, MlpConfig, MlpModel, TrainReport};
#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training data has fewer than two classes")]
    DegenerateData,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("expected {expected} columns, found {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelRange { label: usize, n_classes: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model version {0:?}")]
    Version(String),
}

/// Column count of `x`, checking every row is finite and equally wide.
pub(crate) fn check_rows(x: &[Vec<f64>], expected: Option<usize>) -> Result<usize, LearnError> {
    let width = expected.or_else(|| x.first().map(Vec::len)).unwrap_or(0);
    for (row, r) in x.iter().enumerate() {
        if r.len() != width {
            return Err(LearnError::ShapeMismatch {
                expected: width,
                got: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFiniteFeature { row, col });
        }
    }
    Ok(width)
}

pub(crate) fn check_training(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize, LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::LabelCount {
            rows: x.len(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(LearnError::LabelRange { label, n_classes });
    }
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&l| seen[l] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(LearnError::DegenerateData);
    }
    check_rows(x, None)
}

/// Numerically stable softmax, in place.
pub fn softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Mean cross-entropy of probability rows against class indices.
pub fn cross_entropy(probs: &[Vec<f64>], y: &[usize]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(y)
        .map(|(p, &c)| -p[c].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / y.len().max(1) as f64
}

/// Per-column standardisation fitted on one matrix (the training split).
/// Constant columns get unit scale so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let width = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for r in x {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in x {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform_row(&self, r: &[f64]) -> Vec<f64> {
        r.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let mut z = vec![1000.0, 1001.0, -50.0];
        softmax(&mut z);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(z[1] > z[0] && z[0] > z[2]);
    }

    #[test]
    fn standardizer_fits_train_only() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform_row(&[3.0, 7.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn training_checks() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(check_training(&x, &[1, 1], 2), Err(LearnError::DegenerateData)));
        assert!(matches!(check_training(&x, &[0], 2), Err(LearnError::LabelCount { .. })));
        assert!(matches!(check_training(&x, &[0, 3], 2), Err(LearnError::LabelRange { .. })));
        let bad = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(
            check_training(&bad, &[0, 1], 2),
            Err(LearnError::NonFiniteFeature { row: 1, col: 0 })
        ));
        assert_eq!(check_training(&x, &[0, 1], 2).unwrap(), 1);
    }
}
