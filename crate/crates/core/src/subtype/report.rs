use serde::Serialize;

use super::{Result, Simplex, Subtype, SubtypeError, N_CLASSES};
use crate::metrics::auroc;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub subtype: Subtype,
    pub support: usize,
    pub predicted: usize,
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest AUROC; absent when the class is missing from the truth
    /// or is the only class present.
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub accuracy: f64,
    /// Unweighted mean F1 over classes seen in the truth or the predictions.
    pub macro_f1: f64,
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub classes: Vec<ClassMetrics>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn classification_report(pred: &[Subtype], truth: &[Subtype], proba: &[Simplex]) -> Result<ClassificationReport> {
    if pred.len() != truth.len() || proba.len() != truth.len() {
        return Err(SubtypeError::ShapeMismatch(format!(
            "{} predictions, {} labels, {} probability rows",
            pred.len(),
            truth.len(),
            proba.len()
        )));
    }
    let n = truth.len();
    let present = Subtype::ALL.iter().filter(|t| truth.contains(t)).count();
    if present < 2 {
        return Err(SubtypeError::ShapeMismatch(format!("{present} classes present in the labels, need 2")));
    }
    // Rows are true classes, columns predicted.
    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    for (p, t) in pred.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    let correct: usize = (0..N_CLASSES).map(|k| confusion[k][k]).sum();

    let mut classes = Vec::new();
    let mut f1_sum = 0.0;
    let mut seen = 0;
    for t in Subtype::ALL {
        let k = t.index();
        let tp = confusion[k][k];
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = (0..N_CLASSES).map(|r| confusion[r][k]).sum();
        let f1 = ratio(2 * tp, support + predicted);
        if support + predicted > 0 {
            f1_sum += f1;
            seen += 1;
        }
        let auroc = if support > 0 {
            let scores: Vec<f64> = proba.iter().map(|p| p[k]).collect();
            let labels: Vec<bool> = truth.iter().map(|&l| l == t).collect();
            auroc(&scores, &labels).ok()
        } else {
            None
        };
        classes.push(ClassMetrics {
            subtype: t,
            support,
            predicted,
            true_positives: tp,
            precision: ratio(tp, predicted),
            recall: ratio(tp, support),
            f1,
            auroc,
        });
    }
    Ok(ClassificationReport { n, accuracy: ratio(correct, n), macro_f1: f1_sum / seen as f64, confusion, classes })
}
