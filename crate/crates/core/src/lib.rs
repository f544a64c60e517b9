//! Bag-level anomaly detection over sequential datasets.
//!
//! Instances are grouped into bags; a bag is anomalous iff it contains at
//! least one anomalous instance. Each instance receives a nonnegative
//! strangeness value — its local outlier factor or the reconstruction error
//! of an autoencoder trained on normal data — and an aggregate function
//! collapses a bag's strangeness vector into one score. Scores of the
//! normal-only training bags form a sorted baseline, and a query bag is
//! tested conformally: its p-value is the smoothed fraction of baseline
//! scores at least as large, and the bag is predicted anomalous at confidence
//! c when p ≤ 1 − c. Sweeping c from 0 to 1 yields the ROC curve and AUC.
//!
//! A single-instance comparator ([`stroud`]) tests each instance against the
//! pooled training instances instead, lifting instance p-values to a bag
//! decision through its witness rule.
//!
//! Batch operations (proximity matrices, baseline construction, bag
//! classification) run data-parallel under the default `parallel` feature
//! and sequentially without it; results are identical either way.

pub mod aggregation;
pub mod autoencoder;
pub mod error;
pub mod evaluation;
pub mod lof;
pub mod mil;
mod parallel;
pub mod pipeline;
pub mod scorer;
pub mod stroud;
pub mod types;

pub use aggregation::{aggregate, AggregateFunction};
pub use error::{Error, Result};
pub use types::{validate_dataset, Bag, BagId, Dataset, Instance, InstanceId, Label, Strangeness};
