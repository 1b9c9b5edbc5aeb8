//! Empirical CDF of a duration series and its CSV form.
//!
//! ```text
//! # tool: iolws 0.1.0
//! # seed: 7
//! # config_digest: 3f0c9a1be4d27781
//! # samples: 3
//! duration_s,cumulative_probability
//! 0.4290,0.3333333333333333
//! 0.4512,0.6666666666666666
//! 0.4870,1.0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::sim::{artifact_header, format_seconds, DurationSeries, Micros, MICROS_PER_SEC};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ecdf {
    sorted: Vec<Micros>,
}

impl Ecdf {
    pub fn new(samples: &[Micros]) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::EmptySeries);
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[Micros] {
        &self.sorted
    }

    /// `F(t)`: fraction of samples at or below `t`.
    pub fn eval(&self, t: Micros) -> f64 {
        self.sorted.partition_point(|&s| s <= t) as f64 / self.len() as f64
    }

    pub fn eval_seconds(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.eval((t * MICROS_PER_SEC as f64).floor() as Micros)
    }

    /// Smallest sample `t` with `F(t) >= p`, for `0 < p <= 1`.
    pub fn quantile(&self, p: f64) -> Result<Micros, MetricsError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(MetricsError::InvalidParameter(format!(
                "probability {p} outside (0, 1]"
            )));
        }
        let n = self.len();
        // Smallest k with k / n >= p, evaluated the same way as `eval`.
        let mut k = ((p * n as f64).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / n as f64 >= p {
            k -= 1;
        }
        while (k as f64 / n as f64) < p {
            k += 1;
        }
        Ok(self.sorted[k - 1])
    }

    pub fn quantile_seconds(&self, p: f64) -> Result<f64, MetricsError> {
        Ok(self.quantile(p)? as f64 / MICROS_PER_SEC as f64)
    }

    /// One `(t, F(t))` pair per distinct sample.
    pub fn steps(&self) -> Vec<(Micros, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        for (i, &t) in self.sorted.iter().enumerate() {
            if self.sorted.get(i + 1) != Some(&t) {
                let p = if i + 1 == n {
                    1.0
                } else {
                    (i + 1) as f64 / n as f64
                };
                out.push((t, p));
            }
        }
        out
    }

    pub fn to_csv(&self, seed: u64, config_digest: &str) -> String {
        let mut out = artifact_header(seed, config_digest);
        let _ = writeln!(out, "# samples: {}", self.len());
        out.push_str("duration_s,cumulative_probability\n");
        for (t, p) in self.steps() {
            let _ = writeln!(out, "{},{p:?}", format_seconds(t));
        }
        out
    }

    /// Rebuilds the sample multiset from the steps and the `samples` header.
    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let bad = |detail: String| MetricsError::Parse {
            what: "eCDF CSV",
            detail,
        };
        let n: usize = text
            .lines()
            .filter_map(|l| l.strip_prefix("# samples:"))
            .next()
            .ok_or_else(|| bad("missing samples header".into()))?
            .trim()
            .parse()
            .map_err(|e| bad(format!("samples header: {e}")))?;
        let mut rows = text.lines().filter(|l| !l.starts_with('#'));
        if rows.next() != Some("duration_s,cumulative_probability") {
            return Err(bad("missing column header".into()));
        }
        let mut sorted = Vec::with_capacity(n);
        for row in rows {
            let (t, p) = row
                .split_once(',')
                .ok_or_else(|| bad(format!("row {row:?}")))?;
            let t = parse_duration(t).ok_or_else(|| bad(format!("duration {t:?}")))?;
            let p: f64 = p.parse().map_err(|_| bad(format!("probability {p:?}")))?;
            let count = (p * n as f64).round() as usize;
            if count < sorted.len() || count > n {
                return Err(bad(format!("probability {p} out of order")));
            }
            sorted.resize(count, t);
        }
        if sorted.len() != n {
            return Err(bad(format!("steps cover {} of {n} samples", sorted.len())));
        }
        Self::new(&sorted)
    }
}

fn parse_duration(text: &str) -> Option<Micros> {
    let (whole, frac) = text.split_once('.')?;
    if frac.len() != 4 {
        return None;
    }
    Some(whole.parse::<u64>().ok()? * MICROS_PER_SEC + frac.parse::<u64>().ok()? * 100)
}

pub fn ecdf(series: &DurationSeries) -> Result<Ecdf, MetricsError> {
    Ecdf::new(&series.samples)
}

pub fn quantile(e: &Ecdf, p: f64) -> Result<Micros, MetricsError> {
    e.quantile(p)
}

pub fn export_ecdf_csv(
    e: &Ecdf,
    path: &Path,
    seed: u64,
    config_digest: &str,
) -> Result<(), MetricsError> {
    std::fs::write(path, e.to_csv(seed, config_digest)).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn import_ecdf_csv(path: &Path) -> Result<Ecdf, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ecdf::from_csv(&text)
}
