use serde::{Deserialize, Serialize};

use crate::sim::DurationSeries;

use super::MetricsError;

/// Descriptive statistics of a duration series, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for one sample.
    pub std: f64,
}

impl SummaryStats {
    pub fn from_seconds(samples: &[f64]) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(MetricsError::InvalidParameter(format!(
                "non-finite sample {bad}"
            )));
        }
        let n = samples.len();
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            });
        // Shifted by the first sample so constant series come out exact.
        let shift = samples[0];
        let offset = samples.iter().map(|s| s - shift).sum::<f64>() / n as f64;
        let mean = shift + offset;
        let std = if n > 1 {
            let ss: f64 = samples.iter().map(|s| (s - shift - offset).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        // Rounding in the sum can push the mean a hair outside [min, max].
        let mean = mean.clamp(min, max);
        Ok(Self {
            n,
            min,
            max,
            mean,
            std,
        })
    }
}

pub fn summarize(series: &DurationSeries) -> Result<SummaryStats, MetricsError> {
    SummaryStats::from_seconds(&series.seconds())
}
