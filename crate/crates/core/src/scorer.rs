//! The strangeness scoring contract and its two implementations.
//!
//! A scorer maps each instance of a bag to a nonnegative strangeness value.
//! Scorers are fitted on training data only: bag-local LOF needs no fitting,
//! reference-global LOF builds its proximity context from the pooled training
//! instances, and the MSE scorer trains an autoencoder on them.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::autoencoder::{self, AeArchitecture, AeTrainingConfig, TrainedAe};
use crate::error::{Error, Result};
use crate::lof::{LofConfig, LofScope, PointQuery, ProximityContext};
use crate::types::{Bag, Instance, InstanceId, Strangeness};

/// Identifies a strangeness kind together with every hyperparameter that
/// affects its scores. Baselines may only be queried by a scorer with an
/// identical descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrangenessDescriptor {
    Lof {
        k: usize,
        scope: LofScope,
    },
    ReconstructionMse {
        architecture: AeArchitecture,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    },
}

impl std::fmt::Display for StrangenessDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StrangenessDescriptor::Lof { k, scope } => write!(f, "lof(k={k}, scope={scope:?})"),
            StrangenessDescriptor::ReconstructionMse { architecture, seed, .. } => write!(
                f,
                "mse(arch={}->{:?}, seed={seed})",
                architecture.input_dim, architecture.encoder_widths
            ),
        }
    }
}

/// Maps (fitted context, instance) to a nonnegative strangeness value.
pub trait StrangenessScorer: Send + Sync {
    fn descriptor(&self) -> StrangenessDescriptor;

    /// Score every instance of a bag, in bag order. Instance-specific
    /// failures carry the offending instance id.
    fn score_bag_instances(&self, bag: &Bag) -> Result<Vec<Strangeness>>;
}

fn instance_error(bag: &Bag, instance: InstanceId, source: Error) -> Error {
    Error::InstanceScore {
        bag: bag.id,
        instance,
        source: Box::new(source),
    }
}

/// LOF strangeness under either neighborhood scope.
pub struct LofScorer {
    config: LofConfig,
    global: Option<GlobalContext>,
}

struct GlobalContext {
    ctx: ProximityContext,
    index_of: HashMap<InstanceId, usize>,
}

impl LofScorer {
    /// Bag-local LOF: each bag is its own reference set, so nothing is fitted.
    pub fn bag_local(k: usize) -> Result<Self> {
        Ok(LofScorer {
            config: LofConfig::new(k, LofScope::BagLocal)?,
            global: None,
        })
    }

    /// Reference-global LOF over the pooled training instances. Training
    /// instances are scored with self-exclusion; any other instance is an
    /// external query against the same references.
    pub fn reference_global(k: usize, training_bags: &[Bag]) -> Result<Self> {
        let pooled: Vec<&Instance> = training_bags
            .iter()
            .flat_map(|b| b.instances.iter())
            .collect();
        if pooled.len() < k + 1 {
            return Err(Error::InsufficientNeighbors {
                k,
                available: pooled.len().saturating_sub(1),
            });
        }
        let ctx = ProximityContext::from_points(pooled.iter().map(|i| i.features.clone()).collect())?;
        let index_of = pooled.iter().enumerate().map(|(idx, i)| (i.id, idx)).collect();
        Ok(LofScorer {
            config: LofConfig::new(k, LofScope::ReferenceGlobal)?,
            global: Some(GlobalContext { ctx, index_of }),
        })
    }

    pub fn fit(config: LofConfig, training_bags: &[Bag]) -> Result<Self> {
        match config.scope {
            LofScope::BagLocal => Self::bag_local(config.k),
            LofScope::ReferenceGlobal => Self::reference_global(config.k, training_bags),
        }
    }

    pub fn config(&self) -> LofConfig {
        self.config
    }
}

impl StrangenessScorer for LofScorer {
    fn descriptor(&self) -> StrangenessDescriptor {
        StrangenessDescriptor::Lof {
            k: self.config.k,
            scope: self.config.scope,
        }
    }

    fn score_bag_instances(&self, bag: &Bag) -> Result<Vec<Strangeness>> {
        match (&self.config.scope, &self.global) {
            (LofScope::BagLocal, _) => {
                if let Some(bad) = bag
                    .instances
                    .iter()
                    .find(|i| i.features.iter().any(|v| !v.is_finite()))
                {
                    return Err(instance_error(
                        bag,
                        bad.id,
                        Error::NonFinite {
                            context: "instance features".into(),
                        },
                    ));
                }
                let ctx = ProximityContext::from_instances(&bag.instances)?;
                let scores = ctx.member_lof_scores(self.config.k)?;
                scores.into_iter().map(Strangeness::new).collect()
            }
            (LofScope::ReferenceGlobal, Some(global)) => bag
                .instances
                .iter()
                .map(|inst| {
                    let query = match global.index_of.get(&inst.id) {
                        Some(&idx) => PointQuery::Member(idx),
                        None => PointQuery::External(&inst.features),
                    };
                    global
                        .ctx
                        .lof_score(query, self.config.k)
                        .map_err(|e| instance_error(bag, inst.id, e))
                })
                .collect(),
            (LofScope::ReferenceGlobal, None) => Err(Error::Config(
                "reference-global LOF scorer was not fitted".into(),
            )),
        }
    }
}

/// Autoencoder reconstruction-error strangeness.
pub struct AeScorer {
    model: TrainedAe,
    training: AeTrainingConfig,
}

impl AeScorer {
    /// Train the autoencoder on the pooled training instances.
    pub fn fit(
        training_bags: &[Bag],
        arch: AeArchitecture,
        cfg: &AeTrainingConfig,
    ) -> Result<Self> {
        let pooled: Vec<Instance> = training_bags
            .iter()
            .flat_map(|b| b.instances.iter().cloned())
            .collect();
        let model = autoencoder::train(&pooled, arch, cfg)?;
        Ok(AeScorer {
            model,
            training: *cfg,
        })
    }

    /// Wrap an already trained model.
    pub fn from_model(model: TrainedAe, training: AeTrainingConfig) -> Self {
        AeScorer { model, training }
    }

    pub fn model(&self) -> &TrainedAe {
        &self.model
    }
}

impl StrangenessScorer for AeScorer {
    fn descriptor(&self) -> StrangenessDescriptor {
        StrangenessDescriptor::ReconstructionMse {
            architecture: self.model.architecture,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            learning_rate: self.training.learning_rate,
            seed: self.training.seed,
        }
    }

    fn score_bag_instances(&self, bag: &Bag) -> Result<Vec<Strangeness>> {
        bag.instances
            .iter()
            .map(|inst| {
                self.model
                    .mse_strangeness(inst)
                    .map_err(|e| instance_error(bag, inst.id, e))
            })
            .collect()
    }
}

/// How to build a scorer from training data; the unit of the hyperparameter
/// grid in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerSpec {
    Lof(LofConfig),
    Mse {
        architecture: AeArchitecture,
        training: AeTrainingConfig,
    },
}

/// Fit a scorer on training bags only.
pub fn fit_scorer(spec: &ScorerSpec, training_bags: &[Bag]) -> Result<Box<dyn StrangenessScorer>> {
    match spec {
        ScorerSpec::Lof(config) => Ok(Box::new(LofScorer::fit(*config, training_bags)?)),
        ScorerSpec::Mse {
            architecture,
            training,
        } => Ok(Box::new(AeScorer::fit(training_bags, *architecture, training)?)),
    }
}
