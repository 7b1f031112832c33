use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite sample")]
    NonFinite,
}

/// Mean absolute error and the standard deviation of the absolute errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub samples: usize,
    pub mae: f64,
    /// Sample (n - 1) standard deviation of `|commanded - achieved|`.
    pub std_dev: f64,
}

/// Accuracy of `(commanded, achieved)` pairs.
pub fn accuracy_report(pairs: &[(f64, f64)]) -> Result<Accuracy, MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            needed: 2,
            got: pairs.len(),
        });
    }
    if pairs.iter().any(|(c, a)| !c.is_finite() || !a.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let errors: Vec<f64> = pairs.iter().map(|(c, a)| (c - a).abs()).collect();
    let n = errors.len() as f64;
    let mae = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Accuracy {
        samples: errors.len(),
        mae,
        std_dev: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Round trips, ms.
    pub samples: Vec<f64>,
    pub rtt_mean: f64,
    /// Half the mean round trip, ms.
    pub one_way: f64,
    pub rtt_p50: f64,
    pub rtt_p99: f64,
    pub rtt_max: f64,
    /// Mean bridge time from first byte of a frame to its effect being applied, ms.
    pub bridge_processing: Option<f64>,
}

impl LatencyReport {
    pub fn from_samples(samples: Vec<f64>, bridge_processing: Option<f64>) -> Result<LatencyReport, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
        let rtt_mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(LatencyReport {
            rtt_mean,
            one_way: rtt_mean / 2.0,
            rtt_p50: percentile(&sorted, 0.50),
            rtt_p99: percentile(&sorted, 0.99),
            rtt_max: *sorted.last().expect("non-empty"),
            bridge_processing,
            samples,
        })
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Count, mean and maximum of a stream of values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub max: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
        if self.count == 1 || x > self.max {
            self.max = x;
        }
    }
}
