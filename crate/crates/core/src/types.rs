//! Domain data model: instances, bags, datasets, labels, and strangeness scores.
//!
//! All types are immutable after construction and safe to share across
//! concurrent workers. Construction is deliberately lenient; use
//! [`validate_dataset`] to diagnose invariant breaches before running an
//! experiment.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Opaque instance identifier, unique within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId(pub usize);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Bag identifier, unique within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BagId(pub usize);

impl fmt::Display for BagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bag{}", self.0)
    }
}

/// Binary ground-truth label. Multi-state ground truth is collapsed to
/// `Anomalous` at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomalous,
}

/// One feature vector (a window of a signal or a featurized frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: InstanceId,
    pub features: Vec<f64>,
}

impl Instance {
    pub fn new(id: usize, features: Vec<f64>) -> Self {
        Instance {
            id: InstanceId(id),
            features,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// An ordered collection of instances with an optional bag-level label.
///
/// A bag is anomalous iff it contains at least one anomalous instance
/// (the witness); only the bag-level label is stored because instance-level
/// labels are not available for every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub id: BagId,
    pub instances: Vec<Instance>,
    pub label: Option<Label>,
}

impl Bag {
    pub fn new(id: usize, instances: Vec<Instance>, label: Option<Label>) -> Self {
        Bag {
            id: BagId(id),
            instances,
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Training bags (all normal) plus labeled test bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub training_bags: Vec<Bag>,
    pub test_bags: Vec<Bag>,
    pub feature_dim: usize,
}

impl Dataset {
    pub fn new(training_bags: Vec<Bag>, test_bags: Vec<Bag>, feature_dim: usize) -> Self {
        Dataset {
            training_bags,
            test_bags,
            feature_dim,
        }
    }

    /// All training instances in bag order, pooled.
    pub fn training_instances(&self) -> impl Iterator<Item = &Instance> {
        self.training_bags.iter().flat_map(|b| b.instances.iter())
    }
}

/// Nonnegative finite strangeness value. Higher means more anomalous.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Strangeness(f64);

impl Strangeness {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("strangeness value {value}"),
            });
        }
        if value < 0.0 {
            return Err(Error::Config(format!(
                "strangeness must be nonnegative, got {value}"
            )));
        }
        Ok(Strangeness(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Check every dataset invariant and return one description per violation.
///
/// Returns an empty list iff the dataset is well-formed: non-empty finite
/// features of uniform dimensionality, bags of at least two instances,
/// non-empty normal-only training bags, and labeled test bags.
pub fn validate_dataset(d: &Dataset) -> Vec<String> {
    let mut violations = Vec::new();

    if d.training_bags.is_empty() {
        violations.push("dataset has no training bags".to_string());
    }
    if d.feature_dim == 0 {
        violations.push("feature dimension is zero".to_string());
    }

    let mut check_bag = |bag: &Bag, role: &str| {
        if bag.instances.is_empty() {
            violations.push(format!("{role} {} is empty", bag.id));
        } else if bag.len() < 2 {
            violations.push(format!(
                "{role} {} has {} instance(s); at least 2 required",
                bag.id,
                bag.len()
            ));
        }
        for inst in &bag.instances {
            if inst.features.is_empty() {
                violations.push(format!(
                    "instance {} in {role} {} has no features",
                    inst.id, bag.id
                ));
                continue;
            }
            if inst.dim() != d.feature_dim {
                violations.push(format!(
                    "instance {} in {role} {} has dimension {}, expected {}",
                    inst.id,
                    bag.id,
                    inst.dim(),
                    d.feature_dim
                ));
            }
            if let Some(j) = inst.features.iter().position(|v| !v.is_finite()) {
                violations.push(format!(
                    "instance {} in {role} {} has non-finite feature f{j}",
                    inst.id, bag.id
                ));
            }
        }
    };

    for bag in &d.training_bags {
        check_bag(bag, "training bag");
    }
    for bag in &d.test_bags {
        check_bag(bag, "test bag");
    }

    for bag in &d.training_bags {
        if bag.label != Some(Label::Normal) {
            violations.push(format!("training bag {} not Normal", bag.id));
        }
    }
    for bag in &d.test_bags {
        if bag.label.is_none() {
            violations.push(format!("test bag {} has no ground-truth label", bag.id));
        }
    }

    violations
}
