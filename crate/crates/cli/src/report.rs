//! Pass/fail matrix of scenario outputs against the reference tables.

use std::fmt;

use iolws_core::metrics::{
    compare_to_reference, ecdf, kind_name, summarize, Comparison, LimitCheck, Mode, Reference,
};

use crate::artifacts::Loaded;
use crate::Failure;

pub enum Line {
    Compared {
        kind: &'static str,
        comparison: Comparison,
    },
    Unreferenced {
        name: String,
        mean_s: f64,
    },
    Limit(LimitCheck),
}

pub struct Outcome {
    pub lines: Vec<Line>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.lines.iter().all(|l| match l {
            Line::Compared { comparison, .. } => comparison.pass(),
            Line::Unreferenced { .. } => true,
            Line::Limit(check) => check.pass,
        })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            match line {
                Line::Compared { kind, comparison } => {
                    let verdict = if comparison.pass() { "PASS" } else { "FAIL" };
                    writeln!(f, "{kind:<8} {comparison}  {verdict}")?;
                }
                Line::Unreferenced { name, mean_s } => {
                    writeln!(f, "{name}: mean {mean_s:.4} s, no reference row")?;
                }
                Line::Limit(check) => writeln!(f, "{check}")?,
            }
        }
        writeln!(f, "overall: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

pub fn evaluate(reference: &Reference, loaded: &[Loaded]) -> Result<Outcome, Failure> {
    let mut lines = Vec::new();
    let mut limits = Vec::new();
    for l in loaded {
        let cfg = &l.config;
        let context = |e: iolws_core::metrics::MetricsError| {
            Failure::config(format!("{}: {e}", l.dir.display()))
        };
        let stats = summarize(&l.series).map_err(context)?;
        let mode = Mode::from_safety(cfg.safety);
        match reference.row(cfg.kind, cfg.attenuation_on_db) {
            Some(row) => {
                let tolerance = reference.tolerance_for(row);
                let comparison =
                    compare_to_reference(cfg.attenuation_on_db, &stats, row, mode, &tolerance)
                        .map_err(context)?;
                lines.push(Line::Compared {
                    kind: kind_name(cfg.kind),
                    comparison,
                });
            }
            None => lines.push(Line::Unreferenced {
                name: l.dir.display().to_string(),
                mean_s: stats.mean,
            }),
        }
        let e = ecdf(&l.series).map_err(context)?;
        for limit in reference.limits(cfg.kind, cfg.attenuation_on_db, mode) {
            limits.push(Line::Limit(limit.check(&e, mode).map_err(context)?));
        }
    }
    lines.extend(limits);
    Ok(Outcome { lines })
}
