//! ROC construction from the confidence sweep and AUC computation.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mil::BagVerdict;
use crate::types::Label;

/// One operating point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub confidence: f64,
    pub tau: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Per-level operating points plus the trapezoidal AUC. `auc` is `None` when
/// the ground truth contains a single class, in which case the rate over the
/// missing class is reported as 0 and the curve is still emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: Option<f64>,
}

/// Sweep the confidence levels over a verdict set.
///
/// At each level, FPR = FP/(FP+TN) and TPR = TP/(TP+FN) over the bag
/// predictions. The AUC integrates the sorted, deduplicated point set with
/// (0,0) and (1,1) anchors by the trapezoidal rule.
pub fn roc_from_verdicts(
    verdicts: &[BagVerdict],
    truths: &[Option<Label>],
    levels: &[f64],
) -> Result<RocCurve> {
    if verdicts.len() != truths.len() {
        return Err(Error::Config(format!(
            "{} verdicts but {} ground-truth labels",
            verdicts.len(),
            truths.len()
        )));
    }
    if let Some(missing) = truths.iter().position(|t| t.is_none()) {
        return Err(Error::Config(format!(
            "test bag at position {missing} has no ground-truth label"
        )));
    }
    for v in verdicts {
        if v.predictions.len() != levels.len() {
            return Err(Error::Config(format!(
                "verdict for {} has {} predictions, expected {}",
                v.bag_id,
                v.predictions.len(),
                levels.len()
            )));
        }
    }

    let positives = truths.iter().filter(|t| **t == Some(Label::Anomalous)).count();
    let negatives = truths.len() - positives;

    let points: Vec<RocPoint> = levels
        .iter()
        .enumerate()
        .map(|(li, &c)| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            for (v, t) in verdicts.iter().zip(truths) {
                if v.predictions[li] == Label::Anomalous {
                    match t {
                        Some(Label::Anomalous) => tp += 1,
                        _ => fp += 1,
                    }
                }
            }
            RocPoint {
                confidence: c,
                tau: 1.0 - c,
                fpr: rate(fp, negatives),
                tpr: rate(tp, positives),
            }
        })
        .collect();

    let auc = if positives == 0 || negatives == 0 {
        None
    } else {
        Some(trapezoid_auc(points.iter().map(|p| (p.fpr, p.tpr))))
    };

    Ok(RocCurve { points, auc })
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Trapezoidal area under (fpr, tpr) points after sorting, deduplication,
/// and anchoring at (0,0) and (1,1).
pub fn trapezoid_auc(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
    pts.dedup();

    let mut auc = 0.0;
    for pair in pts.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    auc
}

/// Write the sweep as `confidence,tau,fpr,tpr` rows.
pub fn write_roc_csv(roc: &RocCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["confidence", "tau", "fpr", "tpr"])
        .map_err(csv_io)?;
    for p in &roc.points {
        w.write_record([
            p.confidence.to_string(),
            p.tau.to_string(),
            p.fpr.to_string(),
            p.tpr.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Write one `bag_id,score,p_value,truth` row per verdict.
pub fn write_verdicts_csv(
    verdicts: &[BagVerdict],
    truths: &[Option<Label>],
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bag_id", "score", "p_value", "truth"])
        .map_err(csv_io)?;
    for (v, t) in verdicts.iter().zip(truths) {
        let truth = match t {
            Some(Label::Anomalous) => "1",
            Some(Label::Normal) => "0",
            None => "",
        };
        w.write_record([
            v.bag_id.0.to_string(),
            v.score.to_string(),
            v.p_value.to_string(),
            truth.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mil::{default_confidence_levels, BagVerdict};
    use crate::types::BagId;

    /// Build a verdict directly from a p-value over the default sweep.
    fn verdict(id: usize, p: f64, levels: &[f64]) -> BagVerdict {
        BagVerdict {
            bag_id: BagId(id),
            score: 1.0 - p,
            p_value: p,
            predictions: levels
                .iter()
                .map(|&c| {
                    if p <= 1.0 - c {
                        Label::Anomalous
                    } else {
                        Label::Normal
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_separation_gives_auc_one() {
        let levels = default_confidence_levels();
        let mut verdicts = Vec::new();
        let mut truths = Vec::new();
        for i in 0..10 {
            verdicts.push(verdict(i, 0.05, &levels));
            truths.push(Some(Label::Anomalous));
        }
        for i in 10..20 {
            verdicts.push(verdict(i, 0.8, &levels));
            truths.push(Some(Label::Normal));
        }
        let roc = roc_from_verdicts(&verdicts, &truths, &levels).unwrap();
        assert_eq!(roc.auc, Some(1.0));
    }

    #[test]
    fn single_class_truth_flags_auc_undefined() {
        let levels = default_confidence_levels();
        let verdicts = vec![verdict(0, 0.3, &levels), verdict(1, 0.9, &levels)];
        let truths = vec![Some(Label::Normal), Some(Label::Normal)];
        let roc = roc_from_verdicts(&verdicts, &truths, &levels).unwrap();
        assert_eq!(roc.auc, None);
        assert_eq!(roc.points.len(), levels.len());
    }

    #[test]
    fn anchors_are_present_in_the_sweep() {
        let levels = default_confidence_levels();
        let verdicts = vec![verdict(0, 0.5, &levels), verdict(1, 0.25, &levels)];
        let truths = vec![Some(Label::Normal), Some(Label::Anomalous)];
        let roc = roc_from_verdicts(&verdicts, &truths, &levels).unwrap();
        // Confidence 0 (tau 1) predicts everything anomalous; confidence 1
        // (tau 0) predicts nothing anomalous.
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (1.0, 1.0));
        assert_eq!((last.fpr, last.tpr), (0.0, 0.0));
    }

    #[test]
    fn trapezoid_on_a_diagonal_is_half() {
        let pts = (0..=10).map(|i| (i as f64 / 10.0, i as f64 / 10.0));
        assert!((trapezoid_auc(pts) - 0.5).abs() < 1e-12);
    }
}
