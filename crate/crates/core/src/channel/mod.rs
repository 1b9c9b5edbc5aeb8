//! Radio channel model: programmable attenuation to RSSI, RSSI to per-frame
//! loss probability, and free-space path loss.

mod calibrate;

pub use calibrate::{
    calibrate_per_curve, CalibrationOptions, CalibrationReport, CalibrationTarget, Residual,
    STRONG_RSSI_DBM,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Carrier frequency used for path-loss conversions (2.4 GHz ISM band).
pub const DEFAULT_FREQUENCY_HZ: f64 = 2.4e9;

/// `20*log10(4*pi/c)` in dB for distance in metres and frequency in hertz.
const FSPL_CONSTANT_DB: f64 = 147.55;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid RSSI map: {0}")]
    InvalidMap(String),
    #[error("calibration diverged: {0}")]
    CalibrationDiverged(Box<CalibrationReport>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub master_tx_power_dbm: f64,
    pub device_tx_power_dbm: f64,
    pub off_attenuation_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            master_tx_power_dbm: 10.0,
            device_tx_power_dbm: 4.0,
            off_attenuation_db: 103.0,
        }
    }
}

/// One measured (attenuation, RSSI) calibration point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RssiAnchor {
    pub attenuation_db: f64,
    pub rssi_dbm: f64,
}

/// Piecewise-linear attenuation to RSSI lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RssiMapRepr", into = "RssiMapRepr")]
pub struct RssiMap {
    anchors: Vec<RssiAnchor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RssiMapRepr {
    anchors: Vec<RssiAnchor>,
}

impl TryFrom<RssiMapRepr> for RssiMap {
    type Error = ChannelError;

    fn try_from(repr: RssiMapRepr) -> Result<Self, Self::Error> {
        Self::new(repr.anchors)
    }
}

impl From<RssiMap> for RssiMapRepr {
    fn from(map: RssiMap) -> Self {
        Self {
            anchors: map.anchors,
        }
    }
}

impl Default for RssiMap {
    /// Bench measurements of the shielded two-master setup.
    fn default() -> Self {
        let pairs = [
            (30.0, -37.0),
            (50.0, -53.0),
            (65.0, -67.0),
            (80.0, -83.0),
            (83.0, -87.0),
            (85.0, -89.0),
        ];
        Self::new(
            pairs
                .iter()
                .map(|&(attenuation_db, rssi_dbm)| RssiAnchor {
                    attenuation_db,
                    rssi_dbm,
                })
                .collect(),
        )
        .expect("default anchors are monotone")
    }
}

impl RssiMap {
    pub fn new(anchors: Vec<RssiAnchor>) -> Result<Self, ChannelError> {
        if anchors.len() < 2 {
            return Err(ChannelError::InvalidMap(
                "at least two anchor points required".into(),
            ));
        }
        for pair in anchors.windows(2) {
            if !(pair[1].attenuation_db > pair[0].attenuation_db) {
                return Err(ChannelError::InvalidMap(
                    "attenuations must be strictly increasing".into(),
                ));
            }
            if !(pair[1].rssi_dbm < pair[0].rssi_dbm) {
                return Err(ChannelError::InvalidMap(
                    "RSSI must be strictly decreasing".into(),
                ));
            }
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[RssiAnchor] {
        &self.anchors
    }

    /// Interpolates between anchors and extrapolates the first/last segment.
    pub fn rssi_from_attenuation(&self, attenuation_db: f64) -> f64 {
        let a = &self.anchors;
        let idx = a
            .windows(2)
            .position(|w| attenuation_db <= w[1].attenuation_db)
            .unwrap_or(a.len() - 2);
        let (lo, hi) = (a[idx], a[idx + 1]);
        let t = (attenuation_db - lo.attenuation_db) / (hi.attenuation_db - lo.attenuation_db);
        lo.rssi_dbm + t * (hi.rssi_dbm - lo.rssi_dbm)
    }
}

pub fn rssi_from_attenuation(attenuation_db: f64, map: &RssiMap) -> f64 {
    map.rssi_from_attenuation(attenuation_db)
}

/// Logistic packet error rate in dB:
/// `floor + (1 - floor) / (1 + exp(slope * (rssi - rssi_mid)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerCurve {
    pub rssi_mid: f64,
    pub slope: f64,
    pub floor: f64,
}

impl Default for PerCurve {
    /// Result of `iolws-sim calibrate` against the connect reference rows
    /// (seed 1, 300 repetitions, budget 40).
    fn default() -> Self {
        Self {
            rssi_mid: -90.619140625,
            slope: 0.572021484375,
            floor: 0.0,
        }
    }
}

impl PerCurve {
    pub fn new(rssi_mid: f64, slope: f64, floor: f64) -> Result<Self, ChannelError> {
        let curve = Self {
            rssi_mid,
            slope,
            floor,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// A curve that never loses a frame at any reachable RSSI.
    pub fn lossless() -> Self {
        Self {
            rssi_mid: -1.0e4,
            slope: 1.0,
            floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.rssi_mid.is_finite() {
            return Err(ChannelError::InvalidParameter(
                "rssi_mid must be finite".into(),
            ));
        }
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return Err(ChannelError::InvalidParameter(format!(
                "slope {} must be positive",
                self.slope
            )));
        }
        if !(0.0..0.05).contains(&self.floor) {
            return Err(ChannelError::InvalidParameter(format!(
                "floor {} outside [0, 0.05)",
                self.floor
            )));
        }
        Ok(())
    }

    pub fn per(&self, rssi_dbm: f64) -> f64 {
        let logistic = 1.0 / (1.0 + (self.slope * (rssi_dbm - self.rssi_mid)).exp());
        self.floor + (1.0 - self.floor) * logistic
    }
}

pub fn per_from_rssi(rssi_dbm: f64, curve: &PerCurve) -> f64 {
    curve.per(rssi_dbm)
}

/// Draws one Bernoulli frame-loss outcome.
pub fn sample_frame_loss<R: Rng + ?Sized>(per: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < per
}

/// Free-space path loss in dB at `distance_m` metres.
pub fn fspl_db(distance_m: f64, frequency_hz: f64) -> f64 {
    20.0 * distance_m.log10() + 20.0 * frequency_hz.log10() - FSPL_CONSTANT_DB
}

/// Distance at which free-space propagation produces `path_loss_db`.
pub fn fspl_distance(path_loss_db: f64, frequency_hz: f64) -> Result<f64, ChannelError> {
    if !(path_loss_db > 0.0) || !(frequency_hz > 0.0) {
        return Err(ChannelError::InvalidParameter(format!(
            "path loss {path_loss_db} dB and frequency {frequency_hz} Hz must be positive"
        )));
    }
    Ok(10f64.powf((path_loss_db - 20.0 * frequency_hz.log10() + FSPL_CONSTANT_DB) / 20.0))
}
