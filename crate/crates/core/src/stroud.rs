//! Single-instance StrOUD comparator: conformal testing of individual
//! instances against a pooled instance baseline, lifted to a bag decision.
//!
//! The default lift rule is `AnyInstance`: a bag is anomalous at confidence c
//! iff the minimum instance p-value is at most 1 − c, mirroring the
//! witness-based definition of a positive bag. An alternate rule that
//! aggregates instance scores first and takes a single bag p-value is
//! available behind config.

use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, AggregateFunction};
use crate::error::{Error, Result};
use crate::evaluation::{roc_from_verdicts, RocCurve};
use crate::lof::LofScope;
use crate::mil::{conformal_pvalue, predictions_from_pvalue, BagVerdict};
use crate::parallel;
use crate::scorer::{StrangenessDescriptor, StrangenessScorer};
use crate::types::{Bag, Dataset, Label};

/// Ascending strangeness values of all pooled training instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceBaseline {
    sorted_scores: Vec<f64>,
    descriptor: StrangenessDescriptor,
}

impl InstanceBaseline {
    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted_scores
    }

    /// Total number of training instances.
    pub fn n(&self) -> usize {
        self.sorted_scores.len()
    }

    pub fn descriptor(&self) -> &StrangenessDescriptor {
        &self.descriptor
    }
}

/// How instance-level evidence becomes a bag prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StroudRule {
    /// Anomalous iff any instance p-value is at most 1 − c.
    AnyInstance,
    /// Aggregate instance scores first, then one bag p-value against the
    /// instance baseline.
    AggregateInstances { aggregate: AggregateFunction },
}

fn require_global_scope(scorer: &dyn StrangenessScorer) -> Result<()> {
    if let StrangenessDescriptor::Lof {
        scope: LofScope::BagLocal,
        ..
    } = scorer.descriptor()
    {
        return Err(Error::Config(
            "the single-instance comparator requires reference-global LOF scope".into(),
        ));
    }
    Ok(())
}

/// Score every training instance (pooled over bags) and sort ascending.
pub fn create_instance_baseline(
    training_bags: &[Bag],
    scorer: &dyn StrangenessScorer,
) -> Result<InstanceBaseline> {
    require_global_scope(scorer)?;
    if training_bags.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    let per_bag = parallel::try_map_slice(training_bags, |bag| scorer.score_bag_instances(bag))?;
    let mut scores: Vec<f64> = per_bag
        .into_iter()
        .flatten()
        .map(|s| s.value())
        .collect();
    if scores.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    Ok(InstanceBaseline {
        sorted_scores: scores,
        descriptor: scorer.descriptor(),
    })
}

/// Instance-level conformal p-value: same formula and tie handling as the
/// bag-level one, with instance counts.
pub fn stroud_instance_pvalue(ib: &InstanceBaseline, s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::NonFinite {
            context: format!("instance score {s}"),
        });
    }
    Ok(conformal_pvalue(&ib.sorted_scores, s))
}

/// Classify one bag from its instance p-values.
///
/// Under `AnyInstance` the verdict's score is the maximum instance
/// strangeness and its p-value the minimum instance p-value; they correspond
/// by the monotonicity of the conformal formula.
pub fn stroud_bag_decision(
    bag: &Bag,
    ib: &InstanceBaseline,
    scorer: &dyn StrangenessScorer,
    rule: StroudRule,
    levels: &[f64],
) -> Result<BagVerdict> {
    if scorer.descriptor() != ib.descriptor {
        return Err(Error::DescriptorMismatch {
            baseline: ib.descriptor.to_string(),
            query: scorer.descriptor().to_string(),
        });
    }
    let scores = scorer.score_bag_instances(bag)?;
    let (score, p) = match rule {
        StroudRule::AnyInstance => {
            let mut best_score = f64::NEG_INFINITY;
            let mut min_p = f64::INFINITY;
            for s in &scores {
                let p = stroud_instance_pvalue(ib, s.value())?;
                if p < min_p {
                    min_p = p;
                }
                if s.value() > best_score {
                    best_score = s.value();
                }
            }
            (best_score, min_p)
        }
        StroudRule::AggregateInstances { aggregate: f } => {
            let score = aggregate(&scores, f)?;
            (score, stroud_instance_pvalue(ib, score)?)
        }
    };
    Ok(BagVerdict {
        bag_id: bag.id,
        score,
        p_value: p,
        predictions: predictions_from_pvalue(p, levels),
    })
}

/// Instance baseline from training bags, bag decisions for every test bag,
/// and the ROC sweep.
pub fn run_stroud_experiment(
    dataset: &Dataset,
    scorer: &dyn StrangenessScorer,
    rule: StroudRule,
    levels: &[f64],
) -> Result<(Vec<BagVerdict>, RocCurve)> {
    let ib = create_instance_baseline(&dataset.training_bags, scorer)
        .map_err(|e| e.in_stage("baseline"))?;
    let verdicts = parallel::try_map_slice(&dataset.test_bags, |bag| {
        stroud_bag_decision(bag, &ib, scorer, rule, levels)
    })
    .map_err(|e| e.in_stage("classify"))?;
    let truths: Vec<Option<Label>> = dataset.test_bags.iter().map(|b| b.label).collect();
    let roc = roc_from_verdicts(&verdicts, &truths, levels).map_err(|e| e.in_stage("evaluate"))?;
    Ok((verdicts, roc))
}
