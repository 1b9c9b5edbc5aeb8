//! Bench reference tables and field-by-field comparison against them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::ScenarioKind;

use super::{Ecdf, MetricsError, SummaryStats};

const BUILTIN: &str = include_str!("../../data/reference.toml");

/// Attenuations closer than this are the same reference row.
const ATTENUATION_EPS_DB: f64 = 1e-6;

/// Slack on the inclusive tolerance boundary for decimal round-off.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Iolw,
    Iolws,
}

impl Mode {
    pub fn from_safety(safety: bool) -> Self {
        if safety {
            Self::Iolws
        } else {
            Self::Iolw
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Iolw => "iolw",
            Self::Iolws => "iolws",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Min,
    Max,
    Mean,
    Std,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::Min, Field::Max, Field::Mean, Field::Std];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Min => "min",
            Self::Max => "max",
            Self::Mean => "mean",
            Self::Std => "std",
        }
    }

    fn of(self, s: &SummaryStats) -> f64 {
        match self {
            Self::Min => s.min,
            Self::Max => s.max,
            Self::Mean => s.mean,
            Self::Std => s.std,
        }
    }
}

/// Relative tolerance per field, as a fraction of the reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            min: 0.10,
            max: 0.10,
            mean: 0.10,
            std: 0.50,
        }
    }
}

impl Tolerance {
    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Min => self.min,
            Field::Max => self.max,
            Field::Mean => self.mean,
            Field::Std => self.std,
        }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for f in Field::ALL {
            let t = self.get(f);
            if !(t.is_finite() && t > 0.0) {
                return Err(MetricsError::InvalidParameter(format!(
                    "{} tolerance {t} must be positive",
                    f.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// Reference values of one mode; absent fields are not compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceStats {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl ReferenceStats {
    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::Min => self.min,
            Field::Max => self.max,
            Field::Mean => self.mean,
            Field::Std => self.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub attenuation_db: f64,
    pub rssi_dbm: f64,
    pub iolw: ReferenceStats,
    pub iolws: ReferenceStats,
    /// Fields to compare; all present fields when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<Vec<Field>>,
    /// Row-specific tolerance; the table default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
}

impl ReferenceRow {
    pub fn stats(&self, mode: Mode) -> &ReferenceStats {
        match mode {
            Mode::Iolw => &self.iolw,
            Mode::Iolws => &self.iolws,
        }
    }

    pub fn compared_fields(&self) -> Vec<Field> {
        self.compare.clone().unwrap_or_else(|| Field::ALL.to_vec())
    }
}

/// Upper bound on one quantile of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantileLimit {
    pub kind: ScenarioKind,
    pub attenuation_db: f64,
    pub rssi_dbm: f64,
    pub p: f64,
    pub reference_s: f64,
    pub limit_s: f64,
    /// Applies to both modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

impl QuantileLimit {
    pub fn applies_to(&self, kind: ScenarioKind, attenuation_db: f64, mode: Mode) -> bool {
        self.kind == kind
            && (self.attenuation_db - attenuation_db).abs() < ATTENUATION_EPS_DB
            && (self.mode.is_none() || self.mode == Some(mode))
    }

    pub fn check(&self, e: &Ecdf, mode: Mode) -> Result<LimitCheck, MetricsError> {
        let observed_s = e.quantile_seconds(self.p)?;
        Ok(LimitCheck {
            limit: self.clone(),
            mode,
            observed_s,
            pass: observed_s <= self.limit_s + BOUNDARY_EPS,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub limit: QuantileLimit,
    pub mode: Mode,
    pub observed_s: f64,
    pub pass: bool,
}

impl fmt::Display for LimitCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = &self.limit;
        let stat = if l.p == 1.0 {
            "max".to_string()
        } else {
            format!("q{}", l.p * 100.0)
        };
        write!(
            f,
            "{:<8} {:>5.1} dB {:<5}  {stat}: observed {:.4} s, limit {:.3} s (reference {:.3} s) {}",
            kind_name(l.kind),
            l.attenuation_db,
            self.mode.as_str(),
            self.observed_s,
            l.limit_s,
            l.reference_s,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

pub fn kind_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::RoamingConnect => "connect",
        ScenarioKind::Handover => "handover",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    #[serde(default)]
    pub tolerance: Tolerance,
    pub connect: Vec<ReferenceRow>,
    /// Published handover table as printed; informational only.
    #[serde(default)]
    pub handover_printed: Vec<ReferenceRow>,
    pub handover: Vec<ReferenceRow>,
    #[serde(default)]
    pub limit: Vec<QuantileLimit>,
}

impl Reference {
    /// Reference values shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("bundled reference parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, MetricsError> {
        let r: Self = toml::from_str(text).map_err(|e| MetricsError::Parse {
            what: "reference file",
            detail: e.to_string(),
        })?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        self.tolerance.validate()?;
        for row in self
            .connect
            .iter()
            .chain(&self.handover)
            .chain(&self.handover_printed)
        {
            if let Some(t) = &row.tolerance {
                t.validate()?;
            }
        }
        for l in &self.limit {
            if !(l.p > 0.0 && l.p <= 1.0) || !(l.limit_s > 0.0) {
                return Err(MetricsError::InvalidParameter(format!(
                    "limit at {} dB: p {} or bound {} out of range",
                    l.attenuation_db, l.p, l.limit_s
                )));
            }
        }
        Ok(())
    }

    /// Rows that drive comparisons for `kind`.
    pub fn rows(&self, kind: ScenarioKind) -> &[ReferenceRow] {
        match kind {
            ScenarioKind::RoamingConnect => &self.connect,
            ScenarioKind::Handover => &self.handover,
        }
    }

    pub fn row(&self, kind: ScenarioKind, attenuation_db: f64) -> Option<&ReferenceRow> {
        self.rows(kind)
            .iter()
            .find(|r| (r.attenuation_db - attenuation_db).abs() < ATTENUATION_EPS_DB)
    }

    pub fn limits(
        &self,
        kind: ScenarioKind,
        attenuation_db: f64,
        mode: Mode,
    ) -> Vec<&QuantileLimit> {
        self.limit
            .iter()
            .filter(|l| l.applies_to(kind, attenuation_db, mode))
            .collect()
    }

    /// Tolerance in force for `row`.
    pub fn tolerance_for(&self, row: &ReferenceRow) -> Tolerance {
        row.tolerance.unwrap_or(self.tolerance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCheck {
    pub field: Field,
    pub simulated: f64,
    pub reference: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub attenuation_db: f64,
    pub mode: Mode,
    pub checks: Vec<FieldCheck>,
}

impl Comparison {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:>5.1} dB {:<5}",
            self.attenuation_db,
            self.mode.as_str()
        )?;
        for c in &self.checks {
            write!(
                f,
                "  {} {:.4}/{:.3} {:+.1}% {}",
                c.field.as_str(),
                c.simulated,
                c.reference,
                (c.simulated - c.reference) / c.reference * 100.0,
                if c.pass { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Relative-error check of every gated field; a field passes when its error
/// is at most the tolerance.
pub fn compare_to_reference(
    attenuation_db: f64,
    stats: &SummaryStats,
    row: &ReferenceRow,
    mode: Mode,
    tolerance: &Tolerance,
) -> Result<Comparison, MetricsError> {
    if (attenuation_db - row.attenuation_db).abs() >= ATTENUATION_EPS_DB {
        return Err(MetricsError::RowMismatch {
            expected_db: row.attenuation_db,
            actual_db: attenuation_db,
        });
    }
    tolerance.validate()?;
    let reference = row.stats(mode);
    let checks = row
        .compared_fields()
        .into_iter()
        .filter_map(|field| {
            let r = reference.get(field)?;
            let simulated = field.of(stats);
            let relative_error = (simulated - r).abs() / r.abs();
            let tol = tolerance.get(field);
            Some(FieldCheck {
                field,
                simulated,
                reference: r,
                relative_error,
                tolerance: tol,
                pass: relative_error <= tol + BOUNDARY_EPS,
            })
        })
        .collect();
    Ok(Comparison {
        attenuation_db,
        mode,
        checks,
    })
}
