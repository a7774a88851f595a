//! ROC-AUC, ROC curves, one-vs-rest macro AUC and confusion matrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("only one class present; AUC is undefined")]
    SingleClass,
    #[error("no class has both positives and negatives")]
    NoClassPresent,
    #[error("score matrix row {row} has {got} columns, expected {expected}")]
    Width { row: usize, got: usize, expected: usize },
    #[error("non-finite score at {0}")]
    NonFinite(usize),
}

/// Mann–Whitney AUC: the fraction of positive/negative pairs ranked correctly,
/// ties counting one half. `O(n log n)` via midranks.
pub fn roc_auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of positive midranks (1-based)
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from (0, 0) to (1, 1); one point per distinct score, thresholds
/// descending. The first point has threshold +inf.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, EvalError> {
    roc_auc_binary(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg,
            tpr: tp as f64 / n_pos,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Per-class one-vs-rest AUC. Classes with no positives or no negatives in the
/// evaluated set are `None` and left out of the macro mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub per_class: Vec<Option<f64>>,
    pub macro_auc: f64,
    pub n_per_class: Vec<usize>,
}

impl AucReport {
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.per_class.len())
            .filter(|&c| self.per_class[c].is_some())
            .collect()
    }
}

fn check_matrix(scores: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    for (row, s) in scores.iter().enumerate() {
        if s.len() != n_classes {
            return Err(EvalError::Width {
                row,
                got: s.len(),
                expected: n_classes,
            });
        }
    }
    Ok(())
}

/// One-vs-rest AUC per class and their unweighted mean over present classes.
pub fn macro_ovr_auc(scores: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<AucReport, EvalError> {
    check_matrix(scores, labels, n_classes)?;
    let mut n_per_class = vec![0usize; n_classes];
    for &l in labels {
        n_per_class[l] += 1;
    }
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let col: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        let is_c: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        per_class.push(match roc_auc_binary(&col, &is_c) {
            Ok(a) => Some(a),
            Err(EvalError::SingleClass) => None,
            Err(e) => return Err(e),
        });
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(EvalError::NoClassPresent);
    }
    Ok(AucReport {
        macro_auc: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        n_per_class,
    })
}

/// `counts[true][predicted]`.
pub fn confusion(predicted: &[usize], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>, EvalError> {
    if predicted.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: predicted.len(),
            labels: labels.len(),
        });
    }
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &l) in predicted.iter().zip(labels) {
        m[l][p] += 1;
    }
    Ok(m)
}

/// Arg-max of a score row, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Class counts keyed by index, for reports.
pub fn class_counts(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn worked_example() {
        let auc = roc_auc_binary(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn perfect_inverse_and_constant() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc_binary(&[1.0, 2.0, 3.0, 4.0], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc_binary(&[4.0, 3.0, 2.0, 1.0], &labels).unwrap(), 0.0);
        assert_eq!(roc_auc_binary(&[0.5; 4], &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_and_length_errors() {
        assert_eq!(roc_auc_binary(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClass));
        assert!(matches!(
            roc_auc_binary(&[0.1], &[true, false]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert_eq!(roc_auc_binary(&[f64::NAN, 0.2], &[true, false]), Err(EvalError::NonFinite(0)));
    }

    #[test]
    fn matches_pairwise_oracle_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..1000).map(|_| f64::from(rng.random_range(0..40u8)) / 40.0).collect();
        let labels: Vec<bool> = scores.iter().map(|s| rng.random::<f64>() < 0.3 + 0.4 * s).collect();
        let fast = roc_auc_binary(&scores, &labels).unwrap();
        assert!((fast - pairwise_auc(&scores, &labels)).abs() < 1e-12);
        let curve = roc_curve(&scores, &labels).unwrap();
        assert!((trapezoid_area(&curve) - fast).abs() < 1e-12);
        assert_eq!(curve.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    #[test]
    fn macro_skips_absent_class() {
        let scores = vec![
            vec![0.9, 0.1, 0.0],
            vec![0.2, 0.8, 0.0],
            vec![0.6, 0.4, 0.0],
            vec![0.3, 0.7, 0.0],
        ];
        let labels = [0, 1, 0, 1];
        let r = macro_ovr_auc(&scores, &labels, 3).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(1.0), None]);
        assert_eq!(r.macro_auc, 1.0);
        assert_eq!(r.n_per_class, vec![2, 2, 0]);
        assert_eq!(r.present_classes(), vec![0, 1]);
        assert_eq!(macro_ovr_auc(&scores, &[0, 0, 0, 0], 3), Err(EvalError::NoClassPresent));
    }

    #[test]
    fn confusion_counts() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]];
        let predicted: Vec<usize> = scores.iter().map(|r| argmax(r)).collect();
        let m = confusion(&predicted, &[0, 1, 1], 2).unwrap();
        assert_eq!(m, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(confusion(&[], &[], 2).unwrap(), vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(confusion(&[0, 2, 1], &[0, 2, 1], 3).unwrap()[2], vec![0, 0, 1]);
        assert!(confusion(&[0], &[], 2).is_err());
    }

    #[test]
    fn single_step_curve() {
        let c = roc_curve(&[0.9, 0.1], &[true, false]).unwrap();
        let pts: Vec<(f64, f64)> = c.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn one_hot_and_uniform_probabilities() {
        let labels = [0, 1, 2, 1, 0];
        let one_hot: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..3).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
            .collect();
        let r = macro_ovr_auc(&one_hot, &labels, 3).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0); 3]);
        let uniform = vec![vec![1.0 / 3.0; 3]; 5];
        let r = macro_ovr_auc(&uniform, &labels, 3).unwrap();
        assert_eq!(r.per_class, vec![Some(0.5); 3]);
    }

    #[test]
    fn three_class_toy_matches_pairwise() {
        let probs = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.3, 0.3, 0.4],
            vec![0.1, 0.6, 0.3],
            vec![0.2, 0.2, 0.6],
            vec![0.5, 0.4, 0.1],
            vec![0.3, 0.5, 0.2],
        ];
        let labels = [0, 2, 1, 2, 1, 0];
        let r = macro_ovr_auc(&probs, &labels, 3).unwrap();
        let mut sum = 0.0;
        for c in 0..3 {
            let col: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let is_c: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            let oracle = pairwise_auc(&col, &is_c);
            assert!((r.per_class[c].unwrap() - oracle).abs() < 1e-12);
            sum += oracle;
        }
        assert!((r.macro_auc - sum / 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.random_range(2..=200);
            let levels = rng.random_range(1..=20u32);
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            labels[0] = true;
            labels[1] = false;
            let auc = roc_auc_binary(&scores, &labels).unwrap();
            assert!((auc - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            pairs in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..80)
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| (p.0 * 4.0).round() / 4.0).collect();
            let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let a = roc_auc_binary(&scores, &labels).unwrap();
            let warped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert!((roc_auc_binary(&warped, &labels).unwrap() - a).abs() < 1e-12);
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            prop_assert!((roc_auc_binary(&scores, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
            let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((roc_auc_binary(&negated, &flipped).unwrap() - a).abs() < 1e-12);
            prop_assert!((a - pairwise_auc(&scores, &labels)).abs() < 1e-12);
        }
    }
}
