//! Programmable attenuator toggling between an ON and an OFF setting.

use serde::{Deserialize, Serialize};

use super::time::{Micros, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttenuatorEdge {
    pub at: SimTime,
    pub on: bool,
}

/// Starts OFF at t = 0; each measurement cycle is one OFF then one ON phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttenuatorSchedule {
    pub off_duration_us: Micros,
    pub on_duration_us: Micros,
}

impl Default for AttenuatorSchedule {
    fn default() -> Self {
        Self {
            off_duration_us: 2_000_000,
            on_duration_us: 2_000_000,
        }
    }
}

impl AttenuatorSchedule {
    pub fn period_us(&self) -> Micros {
        self.off_duration_us + self.on_duration_us
    }

    /// Start of the `k`-th ON window (0-based).
    pub fn on_edge(&self, k: u64) -> SimTime {
        SimTime(self.off_duration_us + k * self.period_us())
    }

    /// End of the `k`-th ON window.
    pub fn off_edge(&self, k: u64) -> SimTime {
        self.on_edge(k) + self.on_duration_us
    }

    pub fn is_on(&self, t: SimTime) -> bool {
        t.as_micros() % self.period_us() >= self.off_duration_us
    }

    /// Infinite stream of alternating ON/OFF edges.
    pub fn edges(&self) -> impl Iterator<Item = AttenuatorEdge> + '_ {
        (0u64..).flat_map(move |k| {
            [
                AttenuatorEdge {
                    at: self.on_edge(k),
                    on: true,
                },
                AttenuatorEdge {
                    at: self.off_edge(k),
                    on: false,
                },
            ]
        })
    }
}
