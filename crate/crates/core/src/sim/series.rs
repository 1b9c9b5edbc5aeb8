//! Recorded duration samples of one scenario and their CSV form.
//!
//! ```text
//! # tool: iolws 0.1.0
//! # seed: 7
//! # config_digest: 3f0c9a1be4d27781
//! # discarded: 0
//! rep_index,duration_s
//! 0,0.4512
//! ```

use std::fmt::Write as _;

use super::time::{Micros, MICROS_PER_SEC, SAMPLE_PERIOD_US};
use super::SimError;

pub const TOOL_VERSION: &str = concat!("iolws ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationSeries {
    pub config_digest: String,
    pub seed: u64,
    /// Durations in microseconds, each a multiple of 100 us.
    pub samples: Vec<Micros>,
    pub discarded: u64,
}

/// Formats microseconds as seconds with exactly four decimals.
pub fn format_seconds(us: Micros) -> String {
    debug_assert_eq!(us % SAMPLE_PERIOD_US, 0);
    format!(
        "{}.{:04}",
        us / MICROS_PER_SEC,
        (us % MICROS_PER_SEC) / SAMPLE_PERIOD_US
    )
}

fn parse_seconds(text: &str) -> Result<Micros, SimError> {
    let bad = || SimError::InvalidParameter(format!("malformed duration {text:?}"));
    let (whole, frac) = text.split_once('.').ok_or_else(bad)?;
    if frac.len() != 4 {
        return Err(bad());
    }
    let whole: u64 = whole.parse().map_err(|_| bad())?;
    let frac: u64 = frac.parse().map_err(|_| bad())?;
    Ok(whole * MICROS_PER_SEC + frac * SAMPLE_PERIOD_US)
}

/// `# key: value` comment lines shared by every artifact.
pub fn artifact_header(seed: u64, config_digest: &str) -> String {
    format!("# tool: {TOOL_VERSION}\n# seed: {seed}\n# config_digest: {config_digest}\n")
}

impl DurationSeries {
    pub fn seconds(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|&us| us as f64 / MICROS_PER_SEC as f64)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = artifact_header(self.seed, &self.config_digest);
        let _ = writeln!(out, "# discarded: {}", self.discarded);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rep_index", "duration_s"])
            .expect("in-memory write");
        for (i, &us) in self.samples.iter().enumerate() {
            w.write_record([i.to_string(), format_seconds(us)])
                .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("ascii"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let mut seed = None;
        let mut digest = None;
        let mut discarded = 0;
        for line in text.lines() {
            let Some(comment) = line.strip_prefix('#') else {
                continue;
            };
            let Some((key, value)) = comment.split_once(':') else {
                continue;
            };
            let value = value.trim();
            let bad = |e: std::num::ParseIntError| {
                SimError::InvalidParameter(format!("header {key}: {e}"))
            };
            match key.trim() {
                "seed" => seed = Some(value.parse().map_err(bad)?),
                "config_digest" => digest = Some(value.to_string()),
                "discarded" => discarded = value.parse().map_err(bad)?,
                _ => {}
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| SimError::InvalidParameter(e.to_string()))?;
            let (Some(idx), Some(dur)) = (record.get(0), record.get(1)) else {
                return Err(SimError::InvalidParameter(format!(
                    "row {i}: expected two fields"
                )));
            };
            if idx.parse::<usize>().ok() != Some(i) {
                return Err(SimError::InvalidParameter(format!(
                    "row {i}: rep_index {idx:?} out of sequence"
                )));
            }
            samples.push(parse_seconds(dur)?);
        }
        Ok(Self {
            config_digest: digest
                .ok_or_else(|| SimError::InvalidParameter("missing config_digest header".into()))?,
            seed: seed.ok_or_else(|| SimError::InvalidParameter("missing seed header".into()))?,
            samples,
            discarded,
        })
    }
}
