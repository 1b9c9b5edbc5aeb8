//! Integer-microsecond simulated time.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use super::SimError;

/// Duration in microseconds.
pub type Micros = u64;

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// Sampling grid of the recording oscilloscope (10 kS/s).
pub const SAMPLE_PERIOD_US: Micros = 100;

/// Absolute simulated instant in microseconds since the start of a run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SEC as f64
    }

    /// Time elapsed since `earlier`; panics if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> Micros {
        self.0
            .checked_sub(earlier.0)
            .expect("SimTime::since called with a later instant")
    }
}

impl Add<Micros> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Micros) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<Micros> for SimTime {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = Micros;

    fn sub(self, rhs: SimTime) -> Micros {
        self.since(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Rounds a signed duration up to the next 100 µs sample.
pub fn quantize_duration(t_us: i64) -> Result<Micros, SimError> {
    if t_us < 0 {
        return Err(SimError::InvalidParameter(format!(
            "duration {t_us} us is negative"
        )));
    }
    Ok((t_us as u64).div_ceil(SAMPLE_PERIOD_US) * SAMPLE_PERIOD_US)
}
