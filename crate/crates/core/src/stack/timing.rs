use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::sim::Micros;

/// Distribution of the beacon phase relative to the attenuator ON edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterShape {
    #[default]
    Uniform,
    /// Density falling linearly from 0 to `phase_jitter_max`.
    Triangular,
}

/// Protocol timing and contention knobs. Durations are in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingProfile {
    pub w_cycle_us: Micros,
    /// Beacon repetition period on the configuration channels.
    pub scan_dwell_us: Micros,
    pub pairing_handshake_cycles: u32,
    /// Beacon-to-connected time without any loss.
    pub base_connect_floor_us: Micros,
    pub phase_jitter_max_us: Micros,
    pub jitter_shape: JitterShape,
    pub safety_param_cycles: u32,
    /// Repetitions of a process-data frame within its own W-cycle; a cycle is
    /// missed only when every transmission fails.
    pub process_data_retries: u32,
    /// Consecutive missed cycles after which a connection is declared lost.
    pub loss_threshold: u32,
    /// Wait before repeating a handshake exchange that got no answer.
    pub handshake_retry_us: Micros,
    pub backoff_min_cycles: u32,
    pub backoff_max_cycles: u32,
    /// Collision probability of a configuration-channel frame while another
    /// master is active on the configuration channels.
    pub contention_overlap: f64,
    /// Effective RSSI penalty on configuration-channel frames under contention.
    pub contention_desense_db: f64,
    /// Consecutive failed exchanges after which a pairing attempt is abandoned.
    pub abort_after_failures: u32,
    pub abort_holdoff_us: Micros,
    /// Close-out of a lost connection before the device scans again.
    pub unpair_close_us: Micros,
}

impl Default for TimingProfile {
    fn default() -> Self {
        Self {
            w_cycle_us: 5_000,
            scan_dwell_us: 58_000,
            pairing_handshake_cycles: 22,
            base_connect_floor_us: 429_000,
            phase_jitter_max_us: 58_000,
            jitter_shape: JitterShape::Uniform,
            safety_param_cycles: 5,
            process_data_retries: 2,
            loss_threshold: 3,
            handshake_retry_us: 150_000,
            backoff_min_cycles: 1,
            backoff_max_cycles: 4,
            contention_overlap: 0.08,
            contention_desense_db: 3.0,
            abort_after_failures: 4,
            abort_holdoff_us: 1_500_000,
            unpair_close_us: 50_000,
        }
    }
}

impl TimingProfile {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: &str| Err(ProtocolError::InvalidProfile(msg.to_string()));
        if self.w_cycle_us == 0 || self.scan_dwell_us == 0 {
            return bad("w_cycle_us and scan_dwell_us must be positive");
        }
        if self.pairing_handshake_cycles == 0 {
            return bad("pairing_handshake_cycles must be at least 1");
        }
        if self.base_connect_floor_us < self.handshake_us() {
            return bad("base_connect_floor_us is shorter than the handshake");
        }
        if self.loss_threshold == 0 || self.abort_after_failures == 0 {
            return bad("loss_threshold and abort_after_failures must be at least 1");
        }
        if self.backoff_min_cycles == 0 || self.backoff_min_cycles > self.backoff_max_cycles {
            return bad("backoff cycles must satisfy 1 <= min <= max");
        }
        if !(0.0..1.0).contains(&self.contention_overlap) {
            return bad("contention_overlap must lie in [0, 1)");
        }
        if !(self.contention_desense_db >= 0.0) {
            return bad("contention_desense_db must be non-negative");
        }
        Ok(())
    }

    pub fn handshake_us(&self) -> Micros {
        u64::from(self.pairing_handshake_cycles) * self.w_cycle_us
    }

    /// Synchronisation time between the first usable beacon and the first
    /// handshake exchange.
    pub fn sync_us(&self) -> Micros {
        self.base_connect_floor_us - self.handshake_us()
    }

    pub fn safety_offset_us(&self) -> Micros {
        u64::from(self.safety_param_cycles) * self.w_cycle_us
    }

    pub fn loss_detection_us(&self) -> Micros {
        u64::from(self.loss_threshold) * self.w_cycle_us
    }

    /// Maps a uniform variate to a beacon phase in [0, phase_jitter_max].
    pub fn beacon_phase_us(&self, u: f64) -> Micros {
        let frac = match self.jitter_shape {
            JitterShape::Uniform => u,
            JitterShape::Triangular => 1.0 - (1.0 - u).sqrt(),
        };
        (frac * self.phase_jitter_max_us as f64).floor() as Micros
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_decompose_as_expected() {
        let p = TimingProfile::default();
        p.validate().unwrap();
        assert_eq!(p.safety_offset_us(), 25_000);
        assert_eq!(p.base_connect_floor_us + p.phase_jitter_max_us, 487_000);
        assert_eq!(p.sync_us() + p.handshake_us(), 429_000);
        assert_eq!(p.loss_detection_us(), 15_000);
    }

    #[test]
    fn phase_mapping_bounds() {
        for shape in [JitterShape::Uniform, JitterShape::Triangular] {
            let p = TimingProfile {
                jitter_shape: shape,
                ..Default::default()
            };
            assert_eq!(p.beacon_phase_us(0.0), 0);
            assert!(p.beacon_phase_us(0.999_999) <= p.phase_jitter_max_us);
        }
        let tri = TimingProfile {
            jitter_shape: JitterShape::Triangular,
            ..Default::default()
        };
        // Median of the falling triangle sits at 1 - 1/sqrt(2) of the range.
        assert_eq!(tri.beacon_phase_us(0.5), 16_987);
    }

    #[test]
    fn rejects_inconsistent_profiles() {
        let base = TimingProfile::default();
        let cases = [
            TimingProfile {
                w_cycle_us: 0,
                ..base
            },
            TimingProfile {
                base_connect_floor_us: 100_000,
                ..base
            },
            TimingProfile {
                backoff_min_cycles: 5,
                ..base
            },
            TimingProfile {
                contention_overlap: 1.0,
                ..base
            },
            TimingProfile {
                loss_threshold: 0,
                ..base
            },
        ];
        for case in cases {
            assert!(case.validate().is_err(), "{case:?}");
        }
    }
}
