//! Threshold-free multi-label metrics: class-wise mean average precision,
//! macro AUROC and top-1 accuracy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("ShapeMismatch: scores {scores:?} vs labels {labels:?}")]
    ShapeMismatch {
        scores: (usize, usize),
        labels: (usize, usize),
    },
    #[error("NoPositives: average precision needs at least one positive label")]
    NoPositives,
    #[error("AllClassesEmpty: no class has a positive label")]
    AllClassesEmpty,
    #[error("NoEligibleClass: no class has both positive and negative labels")]
    NoEligibleClass,
    #[error("NoLabeledInstances: every label row is all-zero")]
    NoLabeledInstances,
}

/// Metrics for one evaluation of a head on the test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub cmap: f64,
    pub auroc: f64,
    pub t1acc: f64,
    /// Test instances with at least one positive label (the top-1 denominator).
    pub evaluated_instances: usize,
    /// Classes without any positive test label, left out of cmAP.
    pub skipped_classes: usize,
}

/// A macro mean over classes plus how many classes were left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMean {
    pub value: f64,
    pub skipped: usize,
}

fn check_shapes(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<(), MetricError> {
    if probs.shape() != labels.shape() {
        return Err(MetricError::ShapeMismatch {
            scores: probs.shape(),
            labels: labels.shape(),
        });
    }
    Ok(())
}

fn column<T: Copy>(m: &Matrix<T>, c: usize) -> Vec<T> {
    m.row_iter().map(|r| r[c]).collect()
}

/// Indices sorted by descending score; equal scores keep ascending index order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Mean of precision@r over the ranks r of the positive instances.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    debug_assert_eq!(scores.len(), labels.len());
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, i) in descending_order(scores).into_iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Class-wise mean average precision over classes with at least one positive.
pub fn cmap(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<ClassMean, MetricError> {
    check_shapes(probs, labels)?;
    let mut total = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for c in 0..probs.cols() {
        match average_precision(&column(probs, c), &column(labels, c)) {
            Ok(ap) => {
                total += ap;
                used += 1;
            }
            Err(MetricError::NoPositives) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(MetricError::AllClassesEmpty);
    }
    Ok(ClassMean {
        value: total / used as f64,
        skipped,
    })
}

/// Binary AUROC from the Mann-Whitney rank sum with midranks for ties.
/// Returns `None` unless both classes are present.
pub fn binary_auroc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    debug_assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += midrank * tied_pos as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro AUROC over classes with both positive and negative labels.
pub fn auroc_macro(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<ClassMean, MetricError> {
    check_shapes(probs, labels)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..probs.cols() {
        if let Some(auc) = binary_auroc(&column(probs, c), &column(labels, c)) {
            total += auc;
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricError::NoEligibleClass);
    }
    Ok(ClassMean {
        value: total / used as f64,
        skipped: probs.cols() - used,
    })
}

/// Top-1 accuracy and the number of instances it was computed over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopOne {
    pub accuracy: f64,
    pub evaluated: usize,
}

/// Fraction of instances with any positive label whose highest-scoring class
/// (lowest index on ties) is a positive. All-zero rows are excluded.
pub fn top1_acc(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<TopOne, MetricError> {
    check_shapes(probs, labels)?;
    let mut evaluated = 0usize;
    let mut correct = 0usize;
    for (p, y) in probs.row_iter().zip(labels.row_iter()) {
        if y.iter().all(|&v| v == 0) {
            continue;
        }
        evaluated += 1;
        let top = p
            .iter()
            .enumerate()
            .fold(0, |best, (c, &v)| if v > p[best] { c } else { best });
        if y[top] == 1 {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(MetricError::NoLabeledInstances);
    }
    Ok(TopOne {
        accuracy: correct as f64 / evaluated as f64,
        evaluated,
    })
}

/// Computes the full metric record.
pub fn evaluate(probs: &Matrix<f64>, labels: &Matrix<u8>) -> Result<MetricRecord, MetricError> {
    let map = cmap(probs, labels)?;
    let auc = auroc_macro(probs, labels)?;
    let top = top1_acc(probs, labels)?;
    Ok(MetricRecord {
        cmap: map.value,
        auroc: auc.value,
        t1acc: top.accuracy,
        evaluated_instances: top.evaluated,
        skipped_classes: map.skipped,
    })
}
