//! Confusion matrices and one-vs-rest classification metrics.
//!
//! Matrix convention: `counts[predicted][true]`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ClassLabel;

const K: usize = ClassLabel::COUNT;

/// Classes with fewer true records than this are flagged in reports.
pub const LOW_SUPPORT_THRESHOLD: u64 = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("prediction {value} at position {index} is not a class code")]
    InvalidPrediction { index: usize, value: usize },
    #[error("confusion matrix is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

pub fn build_confusion(
    predictions: &[usize],
    labels: &[ClassLabel],
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, t)) in predictions.iter().zip(labels).enumerate() {
        if p >= K {
            return Err(EvalError::InvalidPrediction { index: i, value: p });
        }
        cm.counts[p][t.code()] += 1;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|c| self.counts[c][c]).sum()
    }

    /// True records of class `c` (column sum).
    pub fn support(&self, c: usize) -> u64 {
        (0..K).map(|p| self.counts[p][c]).sum()
    }

    /// Records predicted as `c` (row sum).
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// CSV with a header row of true classes and one row per predicted class.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "predicted\\true")?;
        for c in ClassLabel::ALL {
            write!(w, ",{}", c.name())?;
        }
        writeln!(w)?;
        for p in ClassLabel::ALL {
            write!(w, "{}", p.name())?;
            for t in 0..K {
                write!(w, ",{}", self.counts[p.code()][t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1_score(precision: f64, recall: f64) -> (f64, bool) {
    let sum = precision + recall;
    if sum == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / sum, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub code: usize,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(TP + TN) / total`, one-vs-rest.
    pub accuracy: f64,
    /// Set when a denominator was zero and the metric was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
    /// Fewer than [`LOW_SUPPORT_THRESHOLD`] true records.
    pub low_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Classes with nonzero support that entered the averages.
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    /// `trace / total`.
    pub overall_accuracy: f64,
    pub macro_avg: MacroMetrics,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn class(&self, c: ClassLabel) -> &ClassMetrics {
        &self.per_class[c.code()]
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let per_class: Vec<ClassMetrics> = ClassLabel::ALL
        .iter()
        .map(|&class| {
            let c = class.code();
            let tp = cm.counts[c][c];
            let fp = cm.predicted(c) - tp;
            let fn_ = cm.support(c) - tp;
            let tn = total - tp - fp - fn_;
            let (precision, precision_undefined) = ratio(tp, tp + fp);
            let (recall, recall_undefined) = ratio(tp, tp + fn_);
            let (f1, f1_undefined) = f1_score(precision, recall);
            let support = tp + fn_;
            ClassMetrics {
                class: class.name().to_string(),
                code: c,
                support,
                tp,
                fp,
                fn_,
                tn,
                precision,
                recall,
                f1,
                accuracy: (tp + tn) as f64 / total as f64,
                precision_undefined,
                recall_undefined,
                f1_undefined,
                low_support: support < LOW_SUPPORT_THRESHOLD,
            }
        })
        .collect();

    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64
    };
    let macro_avg = MacroMetrics {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
        accuracy: mean(|m| m.accuracy),
        classes: present.len(),
    };

    Ok(MetricsReport {
        total,
        overall_accuracy: cm.trace() as f64 / total as f64,
        macro_avg,
        per_class,
        confusion: *cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = [Normal, DoS, DoS, R2L, Probe, Normal];
        let preds: Vec<usize> = labels.iter().map(|l| l.code()).collect();
        let cm = build_confusion(&preds, &labels).unwrap();
        for p in 0..K {
            for t in 0..K {
                let expected = if p == t { cm.support(t) } else { 0 };
                assert_eq!(cm.counts[p][t], expected);
            }
        }
        assert_eq!(cm.support(0), 2);
        assert_eq!(cm.support(1), 2);
        let m = compute_metrics(&cm).unwrap();
        assert_eq!(m.overall_accuracy, 1.0);
        assert_eq!(m.macro_avg.precision, 1.0);
        assert_eq!(m.macro_avg.recall, 1.0);
        assert_eq!(m.macro_avg.f1, 1.0);
        assert_eq!(m.macro_avg.accuracy, 1.0);
        assert_eq!(m.macro_avg.classes, 4);
        // U2R absent: reported with zeros and flags, excluded from the average
        let u2r = m.class(U2R);
        assert_eq!(u2r.support, 0);
        assert!(u2r.precision_undefined && u2r.recall_undefined && u2r.low_support);
    }

    #[test]
    fn empty_inputs_give_zero_matrix() {
        let cm = build_confusion(&[], &[]).unwrap();
        assert_eq!(cm, ConfusionMatrix::default());
        assert_eq!(compute_metrics(&cm), Err(EvalError::Empty));
    }

    #[test]
    fn hand_counted_matrix() {
        let cm = build_confusion(&[0, 0, 1], &[Normal, DoS, DoS]).unwrap();
        assert_eq!(cm.counts[0][0], 1);
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.counts[1][1], 1);
        assert_eq!(cm.total(), 3);
        let m = compute_metrics(&cm).unwrap();
        // Normal: TP 1, FP 1, FN 0 -> P 0.5, R 1; DoS: TP 1, FP 0, FN 1 -> P 1, R 0.5
        assert_eq!(m.class(Normal).precision, 0.5);
        assert_eq!(m.class(Normal).recall, 1.0);
        assert_eq!(m.class(DoS).precision, 1.0);
        assert_eq!(m.class(DoS).recall, 0.5);
        assert!((m.overall_accuracy - 2.0 / 3.0).abs() < 1e-15);
        // Probe is never predicted and never true: precision flagged, excluded from macro
        assert!(m.class(Probe).precision_undefined);
        assert_eq!(m.macro_avg.classes, 2);
    }

    #[test]
    fn mismatched_or_invalid_predictions() {
        assert_eq!(
            build_confusion(&[0], &[Normal, DoS]),
            Err(EvalError::LengthMismatch {
                predictions: 1,
                labels: 2
            })
        );
        assert_eq!(
            build_confusion(&[7], &[Normal]),
            Err(EvalError::InvalidPrediction { index: 0, value: 7 })
        );
    }

    #[test]
    fn csv_layout() {
        let cm = build_confusion(&[0, 4], &[Normal, DoS]).unwrap();
        let mut out = Vec::new();
        cm.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "predicted\\true,Normal,DoS,Probe,U2R,R2L");
        assert_eq!(lines[1], "Normal,1,0,0,0,0");
        assert_eq!(lines[5], "R2L,0,1,0,0,0");
        assert_eq!(lines.len(), 6);
    }
}
