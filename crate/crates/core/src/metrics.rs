//! Accuracy and macro F1 over predicted class ids.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub acc: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
}

/// ACC = matches/total; per-class F1 = 2PR/(P+R) with 0 when P+R = 0;
/// macro F1 averages over all `c` classes, so classes absent from the test
/// set contribute 0.
pub fn compute_metrics(pred: &[usize], truth: &[usize], c: usize) -> Result<MetricReport> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::InvalidArg(format!(
            "metrics need equal nonempty inputs, got {} predictions and {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fnx = vec![0usize; c];
    let mut matches = 0usize;
    for (&p, &t) in pred.iter().zip(truth) {
        assert!(p < c && t < c, "class id out of range: pred {p}, truth {t}, c {c}");
        if p == t {
            matches += 1;
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnx[t] += 1;
        }
    }
    let mut per_class = Vec::with_capacity(c);
    let mut f1_sum = 0.0;
    for cls in 0..c {
        let precision = if tp[cls] + fp[cls] > 0 {
            tp[cls] as f64 / (tp[cls] + fp[cls]) as f64
        } else {
            0.0
        };
        let recall = if tp[cls] + fnx[cls] > 0 {
            tp[cls] as f64 / (tp[cls] + fnx[cls]) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        per_class.push(ClassScores {
            precision,
            recall,
            f1,
        });
    }
    Ok(MetricReport {
        acc: matches as f64 / pred.len() as f64,
        macro_f1: f1_sum / c as f64,
        per_class,
    })
}
