//! Scenario configuration and the repetition loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{PerCurve, RssiMap};
use crate::stack::{ProtocolError, TimingProfile};

use super::engine::{measure_connect, measure_handover};
use super::series::DurationSeries;
use super::time::Micros;
use super::{AttenuatorSchedule, SimError};

/// Highest attenuation the programmable attenuator accepts.
pub const MAX_ATTENUATION_DB: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Attenuator toggles OFF/ON; measures ON edge to connected.
    RoamingConnect,
    /// Controller moves the device from one master to the other.
    Handover,
}

/// When the controller admits the device at the new master.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverOrder {
    /// Unpair at the old and pair at the new master in the same instant.
    #[default]
    Simultaneous,
    /// Pair at the new master once the device has had time to close out the
    /// old connection.
    Sequential,
}

/// Start instant of a handover measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTimestamp {
    /// Last process-data cycle the device received from the old master.
    #[default]
    LastDelivered,
    /// Instant the device declared the old connection lost.
    Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub safety: bool,
    pub attenuation_on_db: f64,
    pub attenuation_off_db: f64,
    pub on_duration_us: Micros,
    pub off_duration_us: Micros,
    pub repetitions: u32,
    pub seed: u64,
    /// ON windows a connect may take before the repetition is discarded.
    pub max_on_windows: u32,
    /// Time allowed for a handover before the repetition is discarded.
    pub handover_window_us: Micros,
    pub handover_order: HandoverOrder,
    pub loss_timestamp: LossTimestamp,
    /// Whether the idle master keeps the configuration channels busy during a
    /// handover. Off gives the single-master decomposition.
    pub contention: bool,
    pub profile: TimingProfile,
    pub rssi_map: RssiMap,
    pub per_curve: PerCurve,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::RoamingConnect,
            safety: false,
            attenuation_on_db: 30.0,
            attenuation_off_db: 103.0,
            on_duration_us: 2_000_000,
            off_duration_us: 2_000_000,
            repetitions: 300,
            seed: 1,
            max_on_windows: 2,
            handover_window_us: 4_000_000,
            handover_order: HandoverOrder::Simultaneous,
            loss_timestamp: LossTimestamp::LastDelivered,
            contention: true,
            profile: TimingProfile::default(),
            rssi_map: RssiMap::default(),
            per_curve: PerCurve::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn connect(attenuation_on_db: f64, safety: bool) -> Self {
        Self {
            attenuation_on_db,
            safety,
            ..Self::default()
        }
    }

    pub fn handover(attenuation_on_db: f64, safety: bool) -> Self {
        Self {
            kind: ScenarioKind::Handover,
            attenuation_on_db,
            safety,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParameter(msg));
        if !(0.0..=MAX_ATTENUATION_DB).contains(&self.attenuation_on_db) {
            return bad(format!(
                "attenuation {} dB outside [0, {MAX_ATTENUATION_DB}] dB",
                self.attenuation_on_db
            ));
        }
        if !(self.attenuation_off_db > self.attenuation_on_db) {
            return bad(format!(
                "OFF attenuation {} dB must exceed ON attenuation {} dB",
                self.attenuation_off_db, self.attenuation_on_db
            ));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.on_duration_us == 0 || self.off_duration_us == 0 {
            return bad("ON and OFF durations must be positive".into());
        }
        if self.max_on_windows == 0 || self.handover_window_us == 0 {
            return bad("measurement windows must be positive".into());
        }
        self.profile
            .validate()
            .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        self.per_curve
            .validate()
            .map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        Ok(())
    }

    pub fn schedule(&self) -> AttenuatorSchedule {
        AttenuatorSchedule {
            off_duration_us: self.off_duration_us,
            on_duration_us: self.on_duration_us,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("scenario config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    /// Measures one repetition; `None` marks an invalid (discarded) attempt.
    pub fn measure(&self, attempt: u64) -> Result<Option<Micros>, ProtocolError> {
        match self.kind {
            ScenarioKind::RoamingConnect => measure_connect(self, attempt),
            ScenarioKind::Handover => measure_handover(self, attempt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Invalid(#[from] SimError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(
        "too many discarded repetitions: {discarded} discarded for {valid} valid of {repetitions}"
    )]
    TooManyDiscards {
        valid: u32,
        discarded: u64,
        repetitions: u32,
    },
}

/// Runs attempts until `repetitions` valid samples exist. Attempt `i` draws
/// from stream `i`, so the outcome does not depend on execution order.
pub fn run_scenario(config: &ScenarioConfig) -> Result<DurationSeries, ScenarioError> {
    config.validate()?;
    let limit = 10 * u64::from(config.repetitions);
    let mut samples = Vec::with_capacity(config.repetitions as usize);
    let mut discarded = 0u64;
    let mut attempt = 0u64;
    while samples.len() < config.repetitions as usize {
        match config.measure(attempt)? {
            Some(d) => samples.push(d),
            None => {
                discarded += 1;
                if discarded > limit {
                    return Err(ScenarioError::TooManyDiscards {
                        valid: samples.len() as u32,
                        discarded,
                        repetitions: config.repetitions,
                    });
                }
            }
        }
        attempt += 1;
    }
    Ok(DurationSeries {
        config_digest: config.digest(),
        seed: config.seed,
        samples,
        discarded,
    })
}

/// Runs several scenarios, optionally in parallel; results keep input order.
pub fn run_sweep(
    configs: &[ScenarioConfig],
    parallel: bool,
) -> Vec<Result<DurationSeries, ScenarioError>> {
    if parallel {
        configs.par_iter().map(run_scenario).collect()
    } else {
        configs.iter().map(run_scenario).collect()
    }
}
