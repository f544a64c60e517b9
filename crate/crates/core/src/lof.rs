//! Local Outlier Factor: density-based strangeness in four steps.
//!
//! 1. k-distance: distance from a point to its k-th nearest reference point.
//! 2. Reachability distance: RD(a, b) = max(k-distance(b), dist(a, b)).
//! 3. Local reachability density: LRD(a) = |N_k(a)| / Σ_{b ∈ N_k(a)} RD(a, b).
//! 4. LOF(a) = (Σ_{b ∈ N_k(a)} LRD(b) / LRD(a)) / |N_k(a)|.
//!
//! Scores are ≈ 1 for points in uniform-density regions and grow above 1 for
//! outliers. Neighbors are always drawn from the reference points of a
//! [`ProximityContext`]; a point is never its own neighbor. The neighborhood
//! N_k(a) contains every reference at distance ≤ k-distance(a), so ties can
//! make it larger than k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::types::{Instance, Strangeness};

/// When every neighbor of a point coincides with it, the average reachability
/// distance is 0 and the LRD is clamped to this ceiling. The LOF of a point
/// inside a cluster of duplicates then comes out as ceiling/ceiling = 1:
/// duplicates are not outliers.
pub const LRD_CEILING: f64 = 1e12;

/// Where LOF neighborhoods come from when scoring a bag's instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LofScope {
    /// Neighbors are the scored instance's own bag-mates. Needs no fitting;
    /// requires k ≤ bag size − 1.
    BagLocal,
    /// Neighbors are the pooled training instances.
    ReferenceGlobal,
}

/// LOF hyperparameters: neighbor count and neighborhood scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LofConfig {
    pub k: usize,
    pub scope: LofScope,
}

impl LofConfig {
    pub fn new(k: usize, scope: LofScope) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("LOF requires k >= 1".into()));
        }
        Ok(LofConfig { k, scope })
    }
}

/// A point being scored against a context: either one of the reference points
/// (self-excluded from its own neighborhood) or an external query.
#[derive(Clone, Copy)]
pub enum PointQuery<'a> {
    Member(usize),
    External(&'a [f64]),
}

/// Reference points with their precomputed pairwise Euclidean distances and
/// per-point neighbor orderings. Immutable after construction; scoring many
/// points may proceed concurrently.
#[derive(Debug, Clone)]
pub struct ProximityContext {
    dim: usize,
    points: Vec<Vec<f64>>,
    /// Per reference point: every other reference as (distance, index),
    /// sorted ascending with index as tie-breaker.
    neighbors: Vec<Vec<(f64, usize)>>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl ProximityContext {
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("proximity context needs at least one point".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Config("reference points must have at least one feature".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("reference point {i}"),
                });
            }
        }

        let neighbors = parallel::map_indices(points.len(), |i| {
            let mut row: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, p)| (euclidean(&points[i], p), j))
                .collect();
            row.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
            row
        });

        Ok(ProximityContext { dim, points, neighbors })
    }

    pub fn from_instances(instances: &[Instance]) -> Result<Self> {
        Self::from_points(instances.iter().map(|i| i.features.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn check_query(&self, q: PointQuery<'_>, k: usize) -> Result<()> {
        let available = match q {
            PointQuery::Member(i) => {
                if i >= self.points.len() {
                    return Err(Error::Config(format!(
                        "member index {i} out of range ({} reference points)",
                        self.points.len()
                    )));
                }
                self.points.len() - 1
            }
            PointQuery::External(x) => {
                if x.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        context: "query point".into(),
                    });
                }
                self.points.len()
            }
        };
        if k == 0 || k > available {
            return Err(Error::InsufficientNeighbors { k, available });
        }
        Ok(())
    }

    /// Candidate neighbors of a query: (distance, reference index) sorted
    /// ascending, self excluded for members.
    fn sorted_distances(&self, q: PointQuery<'_>) -> Vec<(f64, usize)> {
        match q {
            PointQuery::Member(i) => self.neighbors[i].clone(),
            PointQuery::External(x) => {
                let mut row: Vec<(f64, usize)> = self
                    .points
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (euclidean(x, p), j))
                    .collect();
                row.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
                row
            }
        }
    }

    /// Distance from the query to its k-th nearest reference point.
    pub fn k_distance(&self, q: PointQuery<'_>, k: usize) -> Result<f64> {
        self.check_query(q, k)?;
        Ok(self.sorted_distances(q)[k - 1].0)
    }

    /// k-distance and the neighborhood N_k: every reference at distance
    /// ≤ k-distance (tie-inclusive), with the distances to them.
    fn neighborhood(&self, q: PointQuery<'_>, k: usize) -> Result<(f64, Vec<(f64, usize)>)> {
        self.check_query(q, k)?;
        let sorted = self.sorted_distances(q);
        let k_dist = sorted[k - 1].0;
        let end = sorted.partition_point(|&(d, _)| d <= k_dist);
        Ok((k_dist, sorted[..end].to_vec()))
    }

    /// RD(a, b) = max(k-distance(b), dist(a, b)) for a reference point b.
    pub fn reachability_distance(&self, a: PointQuery<'_>, b: usize, k: usize) -> Result<f64> {
        let k_dist_b = self.k_distance(PointQuery::Member(b), k)?;
        let d = match a {
            PointQuery::Member(i) => {
                self.check_query(a, k)?;
                if i == b {
                    return Err(Error::Config(
                        "reachability distance of a point to itself is undefined".into(),
                    ));
                }
                euclidean(&self.points[i], &self.points[b])
            }
            PointQuery::External(x) => {
                self.check_query(a, k)?;
                euclidean(x, &self.points[b])
            }
        };
        Ok(k_dist_b.max(d))
    }

    /// LRD(a) = |N_k(a)| / Σ_{b ∈ N_k(a)} RD(a, b), clamped to [`LRD_CEILING`]
    /// when every neighbor coincides with a.
    pub fn local_reachability_density(&self, a: PointQuery<'_>, k: usize) -> Result<f64> {
        let (_, neighbors) = self.neighborhood(a, k)?;
        let mut sum = 0.0;
        for &(d, b) in &neighbors {
            let k_dist_b = self.k_distance(PointQuery::Member(b), k)?;
            sum += k_dist_b.max(d);
        }
        Ok(lrd_from_sum(neighbors.len(), sum))
    }

    /// LOF(a): mean over neighbors of LRD(b) / LRD(a). Never NaN or infinite.
    pub fn lof_score(&self, a: PointQuery<'_>, k: usize) -> Result<Strangeness> {
        let lrd_a = self.local_reachability_density(a, k)?;
        let (_, neighbors) = self.neighborhood(a, k)?;
        let mut ratio_sum = 0.0;
        for &(_, b) in &neighbors {
            let lrd_b = self.local_reachability_density(PointQuery::Member(b), k)?;
            ratio_sum += lrd_b / lrd_a;
        }
        Strangeness::new(ratio_sum / neighbors.len() as f64)
    }

    /// LOF of every reference point, with k-distances and LRDs computed once
    /// and shared. Equivalent to calling [`lof_score`](Self::lof_score) per
    /// member; this is the batch path used when scoring whole bags.
    pub fn member_lof_scores(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.points.len();
        if k == 0 || k >= n {
            return Err(Error::InsufficientNeighbors {
                k,
                available: n.saturating_sub(1),
            });
        }

        // kdist[i] and the tie-inclusive neighborhood of every member.
        let k_dist: Vec<f64> = (0..n).map(|i| self.neighbors[i][k - 1].0).collect();
        let hoods: Vec<&[(f64, usize)]> = (0..n)
            .map(|i| {
                let row = &self.neighbors[i];
                let end = row.partition_point(|&(d, _)| d <= k_dist[i]);
                &row[..end]
            })
            .collect();

        let lrd: Vec<f64> = hoods
            .iter()
            .map(|hood| {
                let sum: f64 = hood.iter().map(|&(d, b)| k_dist[b].max(d)).sum();
                lrd_from_sum(hood.len(), sum)
            })
            .collect();

        Ok(hoods
            .iter()
            .enumerate()
            .map(|(i, hood)| {
                let ratio_sum: f64 = hood.iter().map(|&(_, b)| lrd[b] / lrd[i]).sum();
                ratio_sum / hood.len() as f64
            })
            .collect())
    }
}

fn lrd_from_sum(neighbor_count: usize, reach_sum: f64) -> f64 {
    if reach_sum == 0.0 {
        LRD_CEILING
    } else {
        (neighbor_count as f64 / reach_sum).min(LRD_CEILING)
    }
}
