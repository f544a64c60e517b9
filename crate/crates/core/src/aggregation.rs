//! Collapse a bag's instance strangeness vector into one bag score.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::types::Strangeness;

/// The six aggregate functions over a bag's instance strangeness values.
///
/// `Dspread` is mean + 2·stdev and `Spread` is mean·stdev, both with the
/// population standard deviation (divide by k): a bag is the complete
/// population of its instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateFunction {
    Max,
    Min,
    Mean,
    Median,
    Dspread,
    Spread,
}

impl AggregateFunction {
    pub const ALL: [AggregateFunction; 6] = [
        AggregateFunction::Max,
        AggregateFunction::Min,
        AggregateFunction::Mean,
        AggregateFunction::Median,
        AggregateFunction::Dspread,
        AggregateFunction::Spread,
    ];

    /// Lowercase name as used in experiment configs.
    pub fn name(self) -> &'static str {
        match self {
            AggregateFunction::Max => "max",
            AggregateFunction::Min => "min",
            AggregateFunction::Mean => "mean",
            AggregateFunction::Median => "median",
            AggregateFunction::Dspread => "dspread",
            AggregateFunction::Spread => "spread",
        }
    }
}

impl fmt::Display for AggregateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AggregateFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(AggregateFunction::Max),
            "min" => Ok(AggregateFunction::Min),
            "mean" => Ok(AggregateFunction::Mean),
            "median" => Ok(AggregateFunction::Median),
            "dspread" => Ok(AggregateFunction::Dspread),
            "spread" => Ok(AggregateFunction::Spread),
            other => Err(Error::Config(format!("unknown aggregate function '{other}'"))),
        }
    }
}

/// Aggregate a non-empty vector of strangeness values into one bag score.
pub fn aggregate(scores: &[Strangeness], f: AggregateFunction) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let values: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;

    let result = match f {
        AggregateFunction::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        AggregateFunction::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
        AggregateFunction::Mean => mean,
        AggregateFunction::Median => median(&values),
        AggregateFunction::Dspread => mean + 2.0 * population_stdev(&values, mean),
        AggregateFunction::Spread => mean * population_stdev(&values, mean),
    };
    debug_assert!(result.is_finite());
    Ok(result)
}

fn population_stdev(values: &[f64], mean: f64) -> f64 {
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Even-length median is the mean of the two central order statistics.
fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("strangeness values are finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> Vec<Strangeness> {
        values.iter().map(|&v| Strangeness::new(v).unwrap()).collect()
    }

    #[test]
    fn max_of_one_two_three() {
        assert_eq!(aggregate(&scores(&[1.0, 2.0, 3.0]), AggregateFunction::Max).unwrap(), 3.0);
    }

    #[test]
    fn constant_vector_has_zero_spread_and_dspread_equals_mean() {
        let s = scores(&[5.0, 5.0, 5.0]);
        assert_eq!(aggregate(&s, AggregateFunction::Spread).unwrap(), 0.0);
        assert_eq!(aggregate(&s, AggregateFunction::Dspread).unwrap(), 5.0);
    }

    #[test]
    fn dspread_uses_population_stdev() {
        // mean = 1, population stdev = 1, dspread = 1 + 2*1 = 3
        assert_eq!(aggregate(&scores(&[0.0, 2.0]), AggregateFunction::Dspread).unwrap(), 3.0);
    }

    #[test]
    fn even_length_median_is_mean_of_central_pair() {
        let s = scores(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(aggregate(&s, AggregateFunction::Median).unwrap(), 2.5);
    }

    #[test]
    fn empty_vector_is_an_error() {
        assert!(matches!(
            aggregate(&[], AggregateFunction::Mean),
            Err(Error::EmptyScores)
        ));
    }

    #[test]
    fn aggregate_names_round_trip() {
        for f in AggregateFunction::ALL {
            assert_eq!(f.name().parse::<AggregateFunction>().unwrap(), f);
        }
    }
}
