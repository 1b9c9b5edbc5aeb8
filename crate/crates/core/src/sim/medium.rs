//! Shared radio medium between the device and the masters.

use crate::channel::{PerCurve, RssiMap};
use crate::stack::TimingProfile;

use super::{AttenuatorSchedule, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Beacons and pairing handshakes on the shared configuration channels.
    Config,
    /// Cyclic process data of an established session.
    ProcessData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    Lost,
    /// Overlapped with another master's configuration-channel traffic.
    Collided,
}

#[derive(Debug, Clone)]
pub struct Medium {
    /// `None` keeps the attenuator permanently in its ON setting.
    schedule: Option<AttenuatorSchedule>,
    rssi_on_dbm: f64,
    curve: PerCurve,
    contention: bool,
    overlap: f64,
    desense_db: f64,
    cycle_transmissions: i32,
}

impl Medium {
    pub fn new(
        attenuation_on_db: f64,
        map: &RssiMap,
        curve: PerCurve,
        schedule: Option<AttenuatorSchedule>,
        contention: bool,
        profile: &TimingProfile,
    ) -> Self {
        Self {
            schedule,
            rssi_on_dbm: map.rssi_from_attenuation(attenuation_on_db),
            curve,
            contention,
            overlap: profile.contention_overlap,
            desense_db: profile.contention_desense_db,
            cycle_transmissions: profile.process_data_retries.saturating_add(1).min(64) as i32,
        }
    }

    pub fn rssi_dbm(&self) -> f64 {
        self.rssi_on_dbm
    }

    /// The OFF setting of the attenuator blocks the link outright.
    pub fn link_up(&self, t: SimTime) -> bool {
        self.schedule.is_none_or(|s| s.is_on(t))
    }

    pub fn per(&self, kind: ChannelKind, t: SimTime) -> f64 {
        if !self.link_up(t) {
            return 1.0;
        }
        match kind {
            ChannelKind::Config if self.contention => {
                self.curve.per(self.rssi_on_dbm - self.desense_db)
            }
            ChannelKind::Config => self.curve.per(self.rssi_on_dbm),
            ChannelKind::ProcessData => self
                .curve
                .per(self.rssi_on_dbm)
                .powi(self.cycle_transmissions),
        }
    }

    /// Decides a transmission from two uniform variates.
    pub fn outcome(
        &self,
        kind: ChannelKind,
        t: SimTime,
        u_loss: f64,
        u_collision: f64,
    ) -> Delivery {
        if u_loss < self.per(kind, t) {
            Delivery::Lost
        } else if kind == ChannelKind::Config && self.contention && u_collision < self.overlap {
            Delivery::Collided
        } else {
            Delivery::Delivered
        }
    }
}
