use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ensemble::VoteMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: usize,
    /// From (0, 0) to (1, 1), one step per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC of `scores` against binary truth; equal scores form a single step.
///
/// Returns the points and trapezoidal AUC.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<(Vec<RocPoint>, f64)> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedCurve(format!("{n_pos} positive and {n_neg} negative cases")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut at = 0;
    while at < order.len() {
        let s = scores[order[at]];
        while at < order.len() && scores[order[at]] == s {
            if positive[order[at]] {
                tp += 1;
            } else {
                fp += 1;
            }
            at += 1;
        }
        let prev = *points.last().expect("starts with origin");
        let next = RocPoint { fpr: fp as f64 / n_neg as f64, tpr: tp as f64 / n_pos as f64 };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
    }
    Ok((points, auc))
}

/// One-against-all ROC for class `class`, scored by its OOB vote proportion.
///
/// Cases never out-of-bag are left out.
pub fn roc_one_vs_all(v: &VoteMatrix, labels: &[usize], class: usize) -> Result<RocCurve> {
    if class >= v.n_classes() {
        return Err(Error::UnknownClass(class));
    }
    let mut scores = Vec::new();
    let mut positive = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        if let Some(row) = v.row(i) {
            scores.push(row[class]);
            positive.push(y == class);
        }
    }
    let (points, auc) = roc_curve(&scores, &positive)?;
    Ok(RocCurve { class, points, auc })
}
