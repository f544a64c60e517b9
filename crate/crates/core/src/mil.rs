//! Bag-level conformal anomaly detection.
//!
//! A baseline is the ascending-sorted list of bag strangeness values over the
//! normal-only training bags. A query bag's score is placed into that list
//! and its p-value is the smoothed fraction of baseline scores at least as
//! large:
//!
//! ```text
//! p = (1 + #{s in baseline : s >= score}) / (n + 1)
//! ```
//!
//! At confidence level c the bag is predicted anomalous when p <= 1 - c.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::aggregation::{aggregate, AggregateFunction};
use crate::error::{Error, Result};
use crate::evaluation::{roc_from_verdicts, RocCurve};
use crate::parallel;
use crate::scorer::{ScorerSpec, StrangenessDescriptor, StrangenessScorer};
use crate::types::{Bag, BagId, Dataset, Label};

pub use crate::scorer::fit_scorer;

/// Strangeness kind, hyperparameters, and aggregate used to build a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub strangeness: StrangenessDescriptor,
    pub aggregate: AggregateFunction,
}

/// Reference distribution of bag strangeness values from normal-only
/// training bags, tagged with the scorer and aggregate that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    sorted_scores: Vec<f64>,
    descriptor: ScorerDescriptor,
}

impl Baseline {
    /// Ascending scores; `descriptor` records how they were computed.
    pub fn from_scores(mut scores: Vec<f64>, descriptor: ScorerDescriptor) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyBaseline);
        }
        if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("baseline score {bad}"),
            });
        }
        scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
        Ok(Baseline {
            sorted_scores: scores,
            descriptor,
        })
    }

    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted_scores
    }

    /// Number of training bags behind this baseline.
    pub fn n(&self) -> usize {
        self.sorted_scores.len()
    }

    pub fn descriptor(&self) -> &ScorerDescriptor {
        &self.descriptor
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("baseline serializes")
    }

    pub fn load_json(path: &Path) -> Result<Baseline> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("baseline file {path:?}: {e}")))
    }
}

/// One classified query bag: its aggregate score, conformal p-value, and the
/// prediction at every confidence level of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagVerdict {
    pub bag_id: BagId,
    pub score: f64,
    pub p_value: f64,
    /// One prediction per confidence level, in level order.
    pub predictions: Vec<Label>,
}

/// The default confidence sweep: 0 to 1 in steps of 0.001 (1001 levels).
pub fn default_confidence_levels() -> Vec<f64> {
    confidence_grid(0.001)
}

/// Evenly spaced confidence levels from 0 to 1 inclusive. The endpoints are
/// exact so the ROC always contains operating points adjacent to (0,0) and
/// (1,1).
pub fn confidence_grid(step: f64) -> Vec<f64> {
    assert!(step > 0.0 && step <= 1.0, "confidence step must lie in (0, 1]");
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Aggregate a scorer's per-instance strangeness values into one bag score.
pub fn bag_score(
    bag: &Bag,
    scorer: &dyn StrangenessScorer,
    f: AggregateFunction,
) -> Result<f64> {
    let scores = scorer.score_bag_instances(bag)?;
    aggregate(&scores, f)
}

/// Score every training bag and sort ascending into a baseline.
pub fn create_baseline(
    training_bags: &[Bag],
    scorer: &dyn StrangenessScorer,
    f: AggregateFunction,
) -> Result<Baseline> {
    if training_bags.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    let scores = parallel::try_map_slice(training_bags, |bag| bag_score(bag, scorer, f))?;
    Baseline::from_scores(
        scores,
        ScorerDescriptor {
            strangeness: scorer.descriptor(),
            aggregate: f,
        },
    )
}

/// Conformal p-value of a score against an ascending-sorted reference list.
///
/// Ties count toward the "equal or greater" set: the insertion index is the
/// leftmost position keeping the list sorted.
pub(crate) fn conformal_pvalue(sorted_scores: &[f64], score: f64) -> f64 {
    let n = sorted_scores.len();
    let index = sorted_scores.partition_point(|&s| s < score);
    (1 + n - index) as f64 / (n + 1) as f64
}

/// p = (1 + #{s >= score}) / (n + 1), in (0, 1], non-increasing in `score`.
pub fn p_value(baseline: &Baseline, score: f64) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::NonFinite {
            context: format!("query score {score}"),
        });
    }
    Ok(conformal_pvalue(&baseline.sorted_scores, score))
}

/// Predictions over a confidence sweep: anomalous at level c iff p <= 1 - c.
pub(crate) fn predictions_from_pvalue(p: f64, levels: &[f64]) -> Vec<Label> {
    levels
        .iter()
        .map(|&c| {
            let tau = 1.0 - c;
            if p <= tau {
                Label::Anomalous
            } else {
                Label::Normal
            }
        })
        .collect()
}

/// Score a query bag against a baseline and predict at every confidence
/// level. The baseline's descriptor must match the scorer and aggregate.
pub fn classify_bag(
    bag: &Bag,
    baseline: &Baseline,
    scorer: &dyn StrangenessScorer,
    f: AggregateFunction,
    levels: &[f64],
) -> Result<BagVerdict> {
    let query_descriptor = ScorerDescriptor {
        strangeness: scorer.descriptor(),
        aggregate: f,
    };
    if query_descriptor != baseline.descriptor {
        return Err(Error::DescriptorMismatch {
            baseline: format!(
                "{} / {}",
                baseline.descriptor.strangeness, baseline.descriptor.aggregate
            ),
            query: format!("{} / {}", query_descriptor.strangeness, query_descriptor.aggregate),
        });
    }
    for &c in levels {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Config(format!("confidence level {c} outside [0, 1]")));
        }
    }

    let score = bag_score(bag, scorer, f)?;
    let p = p_value(baseline, score)?;
    Ok(BagVerdict {
        bag_id: bag.id,
        score,
        p_value: p,
        predictions: predictions_from_pvalue(p, levels),
    })
}

/// Classify many bags; bags are independent and run concurrently, with
/// verdicts collected in input order.
pub fn classify_bags(
    bags: &[Bag],
    baseline: &Baseline,
    scorer: &dyn StrangenessScorer,
    f: AggregateFunction,
    levels: &[f64],
) -> Result<Vec<BagVerdict>> {
    parallel::try_map_slice(bags, |bag| classify_bag(bag, baseline, scorer, f, levels))
}

/// Everything one grid cell produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub baseline: Baseline,
    pub verdicts: Vec<BagVerdict>,
    pub roc: RocCurve,
}

/// Fit the scorer on training data only, build the baseline, classify every
/// test bag, and sweep the ROC.
pub fn run_experiment(
    dataset: &Dataset,
    spec: &ScorerSpec,
    f: AggregateFunction,
    levels: &[f64],
) -> Result<ExperimentResult> {
    let scorer = fit_scorer(spec, &dataset.training_bags).map_err(|e| e.in_stage("fit"))?;
    run_experiment_with_scorer(dataset, scorer.as_ref(), f, levels)
}

/// As [`run_experiment`], for a scorer that is already fitted (lets grid
/// runs share one fitted scorer across aggregates).
pub fn run_experiment_with_scorer(
    dataset: &Dataset,
    scorer: &dyn StrangenessScorer,
    f: AggregateFunction,
    levels: &[f64],
) -> Result<ExperimentResult> {
    let baseline = create_baseline(&dataset.training_bags, scorer, f)
        .map_err(|e| e.in_stage("baseline"))?;
    let verdicts = classify_bags(&dataset.test_bags, &baseline, scorer, f, levels)
        .map_err(|e| e.in_stage("classify"))?;
    let truths: Vec<Option<Label>> = dataset.test_bags.iter().map(|b| b.label).collect();
    let roc = roc_from_verdicts(&verdicts, &truths, levels).map_err(|e| e.in_stage("evaluate"))?;
    Ok(ExperimentResult {
        baseline,
        verdicts,
        roc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::StrangenessDescriptor;
    use crate::types::{Instance, Strangeness};
    use approx::assert_relative_eq;

    /// Scorer returning a fixed value for every instance.
    struct ConstantScorer(f64);

    impl StrangenessScorer for ConstantScorer {
        fn descriptor(&self) -> StrangenessDescriptor {
            StrangenessDescriptor::Lof {
                k: 1,
                scope: crate::lof::LofScope::BagLocal,
            }
        }

        fn score_bag_instances(&self, bag: &Bag) -> Result<Vec<Strangeness>> {
            bag.instances
                .iter()
                .map(|_| Strangeness::new(self.0))
                .collect()
        }
    }

    fn test_baseline(scores: &[f64]) -> Baseline {
        Baseline::from_scores(
            scores.to_vec(),
            ScorerDescriptor {
                strangeness: StrangenessDescriptor::Lof {
                    k: 1,
                    scope: crate::lof::LofScope::BagLocal,
                },
                aggregate: AggregateFunction::Max,
            },
        )
        .unwrap()
    }

    fn bag_of(id: usize, n: usize) -> Bag {
        let instances = (0..n)
            .map(|i| Instance::new(id * 100 + i, vec![i as f64, 0.0]))
            .collect();
        Bag::new(id, instances, Some(Label::Normal))
    }

    #[test]
    fn constant_scorer_mean_bag_score() {
        let bag = bag_of(0, 5);
        let s = bag_score(&bag, &ConstantScorer(1.0), AggregateFunction::Mean).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn baseline_sorts_scores_ascending_and_keeps_duplicates() {
        let b = test_baseline(&[0.4, 0.1, 0.3]);
        assert_eq!(b.sorted_scores(), &[0.1, 0.3, 0.4]);
        let b = test_baseline(&[0.2, 0.2]);
        assert_eq!(b.sorted_scores(), &[0.2, 0.2]);
    }

    #[test]
    fn empty_baseline_is_an_error() {
        let err = create_baseline(&[], &ConstantScorer(1.0), AggregateFunction::Max).unwrap_err();
        assert!(matches!(err, Error::EmptyBaseline));
    }

    #[test]
    fn p_value_counts_scores_at_least_as_large() {
        let b = test_baseline(&[0.1, 0.2, 0.3, 0.4]);
        // Two baseline scores >= 0.25: p = (1 + 2) / 5.
        assert_relative_eq!(p_value(&b, 0.25).unwrap(), 0.6);
        // Below every baseline value: p = 1.
        assert_relative_eq!(p_value(&b, 0.0).unwrap(), 1.0);
        // Above every baseline value: p = 1 / (n + 1).
        assert_relative_eq!(p_value(&b, 9.0).unwrap(), 0.2);
        // Ties count as >=: three scores >= 0.2, p = (1 + 3) / 5.
        assert_relative_eq!(p_value(&b, 0.2).unwrap(), 0.8);
    }

    #[test]
    fn p_value_rejects_non_finite_scores() {
        let b = test_baseline(&[0.1]);
        assert!(p_value(&b, f64::NAN).is_err());
        assert!(p_value(&b, f64::INFINITY).is_err());
    }

    #[test]
    fn prediction_boundary_follows_p_le_tau() {
        let levels = [0.4, 0.41, 0.5, 0.6];
        let preds = predictions_from_pvalue(0.6, &levels);
        // tau = 0.6 exactly: p <= tau, anomalous.
        assert_eq!(preds[0], Label::Anomalous);
        // tau = 0.59: normal. tau = 0.5: normal. tau = 0.4: normal.
        assert_eq!(&preds[1..], &[Label::Normal, Label::Normal, Label::Normal]);
    }

    #[test]
    fn minimal_pvalue_is_anomalous_whenever_tau_admits_it() {
        let b = test_baseline(&[0.1, 0.2, 0.3, 0.4]);
        let n = b.n();
        let p = 1.0 / (n as f64 + 1.0);
        let levels = default_confidence_levels();
        let preds = predictions_from_pvalue(p, &levels);
        for (&c, &pred) in levels.iter().zip(&preds) {
            let expected = if 1.0 - c >= p { Label::Anomalous } else { Label::Normal };
            assert_eq!(pred, expected, "confidence {c}");
        }
    }

    #[test]
    fn classify_bag_rejects_descriptor_mismatch() {
        let baseline = test_baseline(&[1.0, 1.0]);
        let bag = bag_of(7, 4);
        // ConstantScorer reports k=1; a baseline built for Max at k=1 matches,
        // but querying with a different aggregate must fail.
        let err = classify_bag(
            &bag,
            &baseline,
            &ConstantScorer(1.0),
            AggregateFunction::Mean,
            &[0.5],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DescriptorMismatch { .. }), "{err}");
    }

    #[test]
    fn confidence_grid_hits_exact_endpoints() {
        let grid = confidence_grid(0.001);
        assert_eq!(grid.len(), 1001);
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 1.0);
    }

    #[test]
    fn pvalue_is_order_only() {
        let scores = [0.5, 1.5, 2.5, 3.5, 9.0];
        let b = test_baseline(&scores);
        let transformed: Vec<f64> = scores.iter().map(|s| (2.0 * s + 1.0).exp()).collect();
        let bt = test_baseline(&transformed);
        for q in [0.0, 0.5, 1.7, 3.5, 100.0] {
            let p1 = p_value(&b, q).unwrap();
            let p2 = p_value(&bt, (2.0 * q + 1.0).exp()).unwrap();
            assert_eq!(p1, p2);
        }
    }
}
