//! FS-W-Device: scanning, roaming auto-pairing, cyclic exchange, loss
//! detection and the safety parameter exchange.

use std::fmt;

use serde::Serialize;

use crate::pdu::{encode_input_pdu, ControlBits, ControlMCnt, PairingIdentity, SafetyReceiver};
use crate::sim::{Micros, SimTime};

use super::{DeviceId, MasterId, ProtocolError, Session, SessionGrant, TimingProfile};

/// Non-safety process data the device appends to every input frame.
pub const NONSAFETY_INPUT: [u8; 4] = [0x5A, 0x00, 0x00, 0x00];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DevicePhase {
    Unpaired,
    Scanning,
    Pairing,
    Connected,
    SafetyParamExchange,
    SafetyOperational,
    Lost,
}

impl DevicePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unpaired => "UNPAIRED",
            Self::Scanning => "SCANNING",
            Self::Pairing => "PAIRING",
            Self::Connected => "CONNECTED",
            Self::SafetyParamExchange => "SAFETY_PARAM_EXCHANGE",
            Self::SafetyOperational => "SAFETY_OPERATIONAL",
            Self::Lost => "LOST",
        }
    }

    /// Phases in which cyclic process data is exchanged.
    pub fn is_attached(self) -> bool {
        matches!(
            self,
            Self::Connected | Self::SafetyParamExchange | Self::SafetyOperational
        )
    }
}

impl fmt::Display for DevicePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inputs to [`device_step`]. Timer events carry the epoch they were armed in;
/// a timer from an older epoch is stale and ignored.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceEvent {
    Start,
    Beacon {
        master: MasterId,
        rssi_dbm: f64,
        /// Whether the master advertises availability for this device.
        available: bool,
    },
    SyncDone {
        epoch: u32,
    },
    PairingAck {
        master: MasterId,
        step: u32,
        grant: Option<SessionGrant>,
    },
    PairingRejected {
        master: MasterId,
    },
    Collision {
        master: MasterId,
        backoff_cycles: u32,
    },
    ResponseTimeout {
        epoch: u32,
    },
    RetryDue {
        epoch: u32,
    },
    HoldoffExpired {
        epoch: u32,
    },
    CycleTick {
        epoch: u32,
    },
    OutputFrame {
        master: MasterId,
        frame: Vec<u8>,
    },
    CloseDone {
        epoch: u32,
    },
}

impl DeviceEvent {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Start => "start",
            Self::Beacon { .. } => "beacon_received",
            Self::SyncDone { .. } => "sync_done",
            Self::PairingAck { .. } => "pairing_ack",
            Self::PairingRejected { .. } => "pairing_rejected",
            Self::Collision { .. } => "collision",
            Self::ResponseTimeout { .. } => "timeout",
            Self::RetryDue { .. } => "retry",
            Self::HoldoffExpired { .. } => "holdoff_expired",
            Self::CycleTick { .. } => "cycle_tick",
            Self::OutputFrame { .. } => "frame",
            Self::CloseDone { .. } => "close_done",
        }
    }
}

/// Effects requested by [`device_step`], to be applied in order.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceAction {
    Schedule {
        after: Micros,
        event: DeviceEvent,
    },
    SendPairingRequest {
        master: MasterId,
        attempt: u32,
        step: u32,
        try_index: u32,
    },
    SendInput {
        master: MasterId,
        frame: Vec<u8>,
    },
    Transition {
        from: DevicePhase,
        to: DevicePhase,
    },
    ConnectionLost {
        master: MasterId,
        last_delivered: SimTime,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Handshake {
    master: MasterId,
    attempt: u32,
    step: u32,
    try_index: u32,
    consecutive_failures: u32,
}

#[derive(Debug, Clone)]
pub struct DeviceState {
    pub id: DeviceId,
    pub phase: DevicePhase,
    pub current_master: Option<MasterId>,
    pub identity: Option<PairingIdentity>,
    pub missed_cycles: u32,
    pub last_accepted_mcnt: Option<u16>,
    pub safety: bool,
    pub session: Option<Session>,
    pub last_delivered: Option<SimTime>,
    receiver: Option<SafetyReceiver>,
    handshake: Option<Handshake>,
    pairing_attempts: u32,
    param_frames: u32,
    frame_since_tick: bool,
    in_holdoff: bool,
    input_mcnt: ControlMCnt,
    epoch: u32,
}

impl DeviceState {
    pub fn new(id: DeviceId, safety: bool) -> Self {
        Self {
            id,
            phase: DevicePhase::Unpaired,
            current_master: None,
            identity: None,
            missed_cycles: 0,
            last_accepted_mcnt: None,
            safety,
            session: None,
            last_delivered: None,
            receiver: None,
            handshake: None,
            pairing_attempts: 0,
            param_frames: 0,
            frame_since_tick: false,
            in_holdoff: false,
            input_mcnt: ControlMCnt::default(),
            epoch: 0,
        }
    }

    /// Starts in an established session with `master`, as after a completed
    /// connect. Returns the first cycle tick to schedule.
    pub fn attached(
        id: DeviceId,
        safety: bool,
        master: MasterId,
        grant: SessionGrant,
        now: SimTime,
        profile: &TimingProfile,
    ) -> (Self, DeviceAction) {
        let mut dev = Self::new(id, safety);
        dev.phase = if safety {
            DevicePhase::SafetyOperational
        } else {
            DevicePhase::Connected
        };
        let mut session = Session::new(grant.key, now);
        session.safety_armed = safety;
        dev.install(master, grant, session, now);
        let tick = dev.tick_after(profile);
        (dev, tick)
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn pairing_attempts(&self) -> u32 {
        self.pairing_attempts
    }

    fn install(&mut self, master: MasterId, grant: SessionGrant, session: Session, now: SimTime) {
        self.current_master = Some(master);
        self.identity = Some(grant.identity);
        self.receiver = self
            .safety
            .then(|| SafetyReceiver::new(grant.key, grant.identity));
        self.session = Some(session);
        self.missed_cycles = 0;
        self.frame_since_tick = false;
        self.last_delivered = Some(now);
        self.last_accepted_mcnt = None;
        self.input_mcnt = ControlMCnt::default();
    }

    fn bump(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        self.epoch
    }

    fn tick_after(&self, profile: &TimingProfile) -> DeviceAction {
        DeviceAction::Schedule {
            after: profile.w_cycle_us,
            event: DeviceEvent::CycleTick { epoch: self.epoch },
        }
    }

    fn enter(&mut self, to: DevicePhase, actions: &mut Vec<DeviceAction>) {
        actions.push(DeviceAction::Transition {
            from: self.phase,
            to,
        });
        self.phase = to;
    }

    fn send_request(&self, hs: &Handshake, profile: &TimingProfile, out: &mut Vec<DeviceAction>) {
        out.push(DeviceAction::SendPairingRequest {
            master: hs.master,
            attempt: hs.attempt,
            step: hs.step,
            try_index: hs.try_index,
        });
        out.push(DeviceAction::Schedule {
            after: profile.w_cycle_us,
            event: DeviceEvent::ResponseTimeout { epoch: self.epoch },
        });
    }

    /// Records a failed exchange; returns the epoch to arm the retry with, or
    /// `None` when the attempt was abandoned.
    fn fail_exchange(
        &mut self,
        profile: &TimingProfile,
        out: &mut Vec<DeviceAction>,
    ) -> Option<u32> {
        let hs = self.handshake.as_mut().expect("pairing without handshake");
        hs.consecutive_failures += 1;
        let abort = hs.consecutive_failures >= profile.abort_after_failures;
        let epoch = self.bump();
        if abort {
            self.handshake = None;
            self.in_holdoff = true;
            self.enter(DevicePhase::Scanning, out);
            out.push(DeviceAction::Schedule {
                after: profile.abort_holdoff_us,
                event: DeviceEvent::HoldoffExpired { epoch },
            });
            None
        } else {
            Some(epoch)
        }
    }

    fn input_frame(&mut self) -> Vec<u8> {
        self.input_mcnt = self.input_mcnt.next();
        match (&self.session, self.identity) {
            (Some(session), Some(identity)) if self.safety => {
                let safety = [0u8; crate::pdu::INPUT_SAFETY_LEN];
                let ctl = self.input_mcnt.with_control(ControlBits::DATA);
                encode_input_pdu(&safety, &NONSAFETY_INPUT, ctl, identity, &session.key)
                    .expect("fixed-size input frame encodes")
            }
            _ => NONSAFETY_INPUT.to_vec(),
        }
    }
}

fn violation(state: &DeviceState, event: &DeviceEvent) -> ProtocolError {
    ProtocolError::ProtocolViolation {
        phase: state.phase.as_str(),
        event: event.name(),
    }
}

/// Advances the device by one event.
pub fn device_step(
    state: &mut DeviceState,
    event: DeviceEvent,
    now: SimTime,
    profile: &TimingProfile,
) -> Result<Vec<DeviceAction>, ProtocolError> {
    use DevicePhase as P;
    let mut out = Vec::new();

    if let DeviceEvent::SyncDone { epoch }
    | DeviceEvent::ResponseTimeout { epoch }
    | DeviceEvent::RetryDue { epoch }
    | DeviceEvent::HoldoffExpired { epoch }
    | DeviceEvent::CycleTick { epoch }
    | DeviceEvent::CloseDone { epoch } = event
    {
        if epoch != state.epoch {
            return Ok(out);
        }
    }

    match event {
        DeviceEvent::Start => {
            if state.phase != P::Unpaired {
                return Err(violation(state, &event));
            }
            state.enter(P::Scanning, &mut out);
        }
        DeviceEvent::Beacon {
            master, available, ..
        } => {
            // Beacons are broadcast; outside an idle scan they are ignored.
            if state.phase == P::Scanning && !state.in_holdoff && available {
                state.pairing_attempts += 1;
                state.handshake = Some(Handshake {
                    master,
                    attempt: state.pairing_attempts,
                    step: 0,
                    try_index: 0,
                    consecutive_failures: 0,
                });
                let epoch = state.bump();
                state.enter(P::Pairing, &mut out);
                out.push(DeviceAction::Schedule {
                    after: profile.sync_us(),
                    event: DeviceEvent::SyncDone { epoch },
                });
            }
        }
        DeviceEvent::SyncDone { .. } => {
            let Some(hs) = state.handshake.filter(|_| state.phase == P::Pairing) else {
                return Err(violation(state, &event));
            };
            state.send_request(&hs, profile, &mut out);
        }
        DeviceEvent::PairingAck {
            master,
            step,
            ref grant,
        } => {
            let hs = match state.handshake {
                Some(hs) if state.phase == P::Pairing && hs.master == master && hs.step == step => {
                    hs
                }
                _ => return Err(violation(state, &event)),
            };
            state.bump();
            if step + 1 < profile.pairing_handshake_cycles {
                let next = Handshake {
                    step: step + 1,
                    try_index: 0,
                    consecutive_failures: 0,
                    ..hs
                };
                state.handshake = Some(next);
                state.send_request(&next, profile, &mut out);
            } else {
                let Some(grant) = grant.clone() else {
                    return Err(violation(state, &event));
                };
                state.handshake = None;
                state.install(master, grant.clone(), Session::new(grant.key, now), now);
                state.enter(P::Connected, &mut out);
                if state.safety {
                    state.param_frames = 0;
                    state.enter(P::SafetyParamExchange, &mut out);
                }
                out.push(state.tick_after(profile));
            }
        }
        DeviceEvent::PairingRejected { master } => {
            if state.phase != P::Pairing || state.handshake.map(|h| h.master) != Some(master) {
                return Err(violation(state, &event));
            }
            state.handshake = None;
            state.bump();
            state.enter(P::Scanning, &mut out);
        }
        DeviceEvent::Collision {
            master,
            backoff_cycles,
        } => {
            if state.phase != P::Pairing || state.handshake.map(|h| h.master) != Some(master) {
                return Err(violation(state, &event));
            }
            if let Some(epoch) = state.fail_exchange(profile, &mut out) {
                out.push(DeviceAction::Schedule {
                    after: u64::from(backoff_cycles) * profile.w_cycle_us,
                    event: DeviceEvent::RetryDue { epoch },
                });
            }
        }
        DeviceEvent::ResponseTimeout { .. } => {
            if state.phase != P::Pairing {
                return Err(violation(state, &event));
            }
            if let Some(epoch) = state.fail_exchange(profile, &mut out) {
                out.push(DeviceAction::Schedule {
                    after: profile.handshake_retry_us,
                    event: DeviceEvent::RetryDue { epoch },
                });
            }
        }
        DeviceEvent::RetryDue { .. } => {
            let Some(hs) = state
                .handshake
                .as_mut()
                .filter(|_| state.phase == P::Pairing)
            else {
                return Err(violation(state, &event));
            };
            hs.try_index += 1;
            let hs = *hs;
            state.send_request(&hs, profile, &mut out);
        }
        DeviceEvent::HoldoffExpired { .. } => {
            state.in_holdoff = false;
        }
        DeviceEvent::CycleTick { .. } => {
            if !state.phase.is_attached() {
                return Err(violation(state, &event));
            }
            if std::mem::take(&mut state.frame_since_tick) {
                state.missed_cycles = 0;
            } else {
                state.missed_cycles += 1;
            }
            if state.missed_cycles >= profile.loss_threshold {
                let master = state.current_master.take().expect("attached to a master");
                let last_delivered = state.last_delivered.expect("attached session");
                state.session = None;
                state.receiver = None;
                let epoch = state.bump();
                state.enter(P::Lost, &mut out);
                out.push(DeviceAction::ConnectionLost {
                    master,
                    last_delivered,
                });
                out.push(DeviceAction::Schedule {
                    after: profile.unpair_close_us,
                    event: DeviceEvent::CloseDone { epoch },
                });
            } else {
                out.push(state.tick_after(profile));
            }
        }
        DeviceEvent::OutputFrame { master, ref frame } => {
            if !state.phase.is_attached() || state.current_master != Some(master) {
                return Ok(out);
            }
            let param = match state.receiver.as_mut() {
                Some(rx) => match rx.accept_output(frame) {
                    Ok(pdu) => {
                        state.last_accepted_mcnt = Some(pdu.control_mcnt.mcnt());
                        pdu.control_mcnt
                            .control()
                            .contains(ControlBits::PARAM_EXCHANGE)
                    }
                    Err(err) => {
                        log::debug!("device {} dropped output frame: {err}", state.id);
                        return Ok(out);
                    }
                },
                None => false,
            };
            state.frame_since_tick = true;
            state.last_delivered = Some(now);
            if state.phase == P::SafetyParamExchange && param {
                state.param_frames += 1;
                if state.param_frames >= profile.safety_param_cycles {
                    if let Some(session) = state.session.as_mut() {
                        session.safety_armed = true;
                    }
                    state.enter(P::SafetyOperational, &mut out);
                }
            }
            let frame = state.input_frame();
            out.push(DeviceAction::SendInput { master, frame });
        }
        DeviceEvent::CloseDone { .. } => {
            if state.phase != P::Lost {
                return Err(violation(state, &event));
            }
            state.enter(P::Scanning, &mut out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdu::{encode_output_pdu, SessionKey};

    fn profile() -> TimingProfile {
        TimingProfile::default()
    }

    fn grant() -> SessionGrant {
        SessionGrant {
            key: SessionKey::new([1; 16]),
            identity: PairingIdentity::new(1, 2).unwrap(),
        }
    }

    fn step(s: &mut DeviceState, e: DeviceEvent) -> Vec<DeviceAction> {
        device_step(s, e, SimTime::ZERO, &profile()).unwrap()
    }

    fn timer(s: &mut DeviceState, make: impl FnOnce(u32) -> DeviceEvent) -> Vec<DeviceAction> {
        let event = make(s.epoch());
        step(s, event)
    }

    fn scanning(safety: bool) -> DeviceState {
        let mut s = DeviceState::new(7, safety);
        step(&mut s, DeviceEvent::Start);
        s
    }

    fn beacon(available: bool) -> DeviceEvent {
        DeviceEvent::Beacon {
            master: 0,
            rssi_dbm: -40.0,
            available,
        }
    }

    fn pair(s: &mut DeviceState) {
        step(s, beacon(true));
        timer(s, |epoch| DeviceEvent::SyncDone { epoch });
        let n = profile().pairing_handshake_cycles;
        for k in 0..n {
            let grant = (k + 1 == n).then(grant);
            step(
                s,
                DeviceEvent::PairingAck {
                    master: 0,
                    step: k,
                    grant,
                },
            );
        }
    }

    #[test]
    fn start_enters_scanning() {
        let s = scanning(false);
        assert_eq!(s.phase, DevicePhase::Scanning);
    }

    #[test]
    fn beacon_starts_pairing() {
        let mut s = scanning(false);
        let out = step(&mut s, beacon(true));
        assert_eq!(s.phase, DevicePhase::Pairing);
        assert!(out.contains(&DeviceAction::Schedule {
            after: 319_000,
            event: DeviceEvent::SyncDone { epoch: s.epoch() }
        }));
        let out = timer(&mut s, |epoch| DeviceEvent::SyncDone { epoch });
        assert!(matches!(
            out[0],
            DeviceAction::SendPairingRequest {
                step: 0,
                try_index: 0,
                ..
            }
        ));
    }

    #[test]
    fn unavailable_beacon_is_ignored() {
        let mut s = scanning(false);
        assert!(step(&mut s, beacon(false)).is_empty());
        assert_eq!(s.phase, DevicePhase::Scanning);
    }

    #[test]
    fn full_handshake_connects() {
        let mut s = scanning(false);
        pair(&mut s);
        assert_eq!(s.phase, DevicePhase::Connected);
        assert_eq!(s.current_master, Some(0));
        assert_eq!(s.identity, Some(grant().identity));
    }

    #[test]
    fn safety_mode_enters_parameter_exchange() {
        let mut s = scanning(true);
        pair(&mut s);
        assert_eq!(s.phase, DevicePhase::SafetyParamExchange);
        let id = grant().identity;
        let key = grant().key;
        for mcnt in 1..=5u16 {
            let ctl = ControlMCnt::new(ControlBits::PARAM_EXCHANGE, mcnt).unwrap();
            let frame = encode_output_pdu(&[0; 8], ctl, id, &key).unwrap();
            let out = step(&mut s, DeviceEvent::OutputFrame { master: 0, frame });
            assert!(matches!(out.last(), Some(DeviceAction::SendInput { .. })));
        }
        assert_eq!(s.phase, DevicePhase::SafetyOperational);
        assert!(s.session.as_ref().unwrap().safety_armed);
    }

    #[test]
    fn forged_output_frame_does_not_count() {
        let mut s = scanning(true);
        pair(&mut s);
        let ctl = ControlMCnt::new(ControlBits::PARAM_EXCHANGE, 1).unwrap();
        let frame =
            encode_output_pdu(&[0; 8], ctl, grant().identity, &SessionKey::new([2; 16])).unwrap();
        assert!(step(&mut s, DeviceEvent::OutputFrame { master: 0, frame }).is_empty());
        let out = timer(&mut s, |epoch| DeviceEvent::CycleTick { epoch });
        assert_eq!(s.missed_cycles, 1);
        assert!(matches!(out[0], DeviceAction::Schedule { .. }));
    }

    #[test]
    fn loss_after_threshold_missed_cycles() {
        let mut s = scanning(false);
        pair(&mut s);
        for k in 1..3 {
            timer(&mut s, |epoch| DeviceEvent::CycleTick { epoch });
            assert_eq!(s.missed_cycles, k);
            assert_eq!(s.phase, DevicePhase::Connected);
        }
        let out = timer(&mut s, |epoch| DeviceEvent::CycleTick { epoch });
        assert_eq!(s.phase, DevicePhase::Lost);
        assert!(out
            .iter()
            .any(|a| matches!(a, DeviceAction::ConnectionLost { master: 0, .. })));
        assert!(s.session.is_none());
        timer(&mut s, |epoch| DeviceEvent::CloseDone { epoch });
        assert_eq!(s.phase, DevicePhase::Scanning);
    }

    #[test]
    fn delivered_frame_resets_missed_count() {
        let mut s = scanning(false);
        pair(&mut s);
        timer(&mut s, |epoch| DeviceEvent::CycleTick { epoch });
        step(
            &mut s,
            DeviceEvent::OutputFrame {
                master: 0,
                frame: vec![0],
            },
        );
        timer(&mut s, |epoch| DeviceEvent::CycleTick { epoch });
        assert_eq!(s.missed_cycles, 0);
    }

    #[test]
    fn consecutive_failures_abort_with_holdoff() {
        let mut s = scanning(false);
        step(&mut s, beacon(true));
        timer(&mut s, |epoch| DeviceEvent::SyncDone { epoch });
        for _ in 0..3 {
            let out = timer(&mut s, |epoch| DeviceEvent::ResponseTimeout { epoch });
            assert_eq!(
                out,
                [DeviceAction::Schedule {
                    after: 150_000,
                    event: DeviceEvent::RetryDue { epoch: s.epoch() }
                }]
            );
            timer(&mut s, |epoch| DeviceEvent::RetryDue { epoch });
        }
        timer(&mut s, |epoch| DeviceEvent::ResponseTimeout { epoch });
        assert_eq!(s.phase, DevicePhase::Scanning);
        assert!(
            step(&mut s, beacon(true)).is_empty(),
            "beacons ignored in holdoff"
        );
        timer(&mut s, |epoch| DeviceEvent::HoldoffExpired { epoch });
        step(&mut s, beacon(true));
        assert_eq!(s.phase, DevicePhase::Pairing);
    }

    #[test]
    fn collision_backs_off_in_cycles() {
        let mut s = scanning(false);
        step(&mut s, beacon(true));
        timer(&mut s, |epoch| DeviceEvent::SyncDone { epoch });
        let out = step(
            &mut s,
            DeviceEvent::Collision {
                master: 0,
                backoff_cycles: 3,
            },
        );
        assert!(matches!(
            out[0],
            DeviceAction::Schedule { after: 15_000, .. }
        ));
    }

    #[test]
    fn stale_timers_are_ignored() {
        let mut s = scanning(false);
        step(&mut s, beacon(true));
        let stale = s.epoch().wrapping_sub(1);
        assert!(step(&mut s, DeviceEvent::ResponseTimeout { epoch: stale }).is_empty());
        assert_eq!(s.phase, DevicePhase::Pairing);
    }

    #[test]
    fn malformed_events_are_violations() {
        let p = profile();
        let mut s = DeviceState::new(1, false);
        let ack = DeviceEvent::PairingAck {
            master: 0,
            step: 0,
            grant: None,
        };
        assert!(matches!(
            device_step(&mut s, ack, SimTime::ZERO, &p),
            Err(ProtocolError::ProtocolViolation {
                phase: "UNPAIRED",
                event: "pairing_ack"
            })
        ));
        let mut s = scanning(false);
        assert!(device_step(&mut s, DeviceEvent::Start, SimTime::ZERO, &p).is_err());
        assert!({
            let epoch = s.epoch();
            device_step(&mut s, DeviceEvent::CycleTick { epoch }, SimTime::ZERO, &p)
        }
        .is_err());
        // Final ack without session material.
        step(&mut s, beacon(true));
        timer(&mut s, |epoch| DeviceEvent::SyncDone { epoch });
        for k in 0..p.pairing_handshake_cycles - 1 {
            step(
                &mut s,
                DeviceEvent::PairingAck {
                    master: 0,
                    step: k,
                    grant: None,
                },
            );
        }
        let last = DeviceEvent::PairingAck {
            master: 0,
            step: p.pairing_handshake_cycles - 1,
            grant: None,
        };
        assert!(device_step(&mut s, last, SimTime::ZERO, &p).is_err());
    }
}
