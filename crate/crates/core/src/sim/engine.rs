//! Event loop coupling one device, one or two masters and the medium.
//!
//! Timers and protocol responses travel through the event queue. Frames that
//! survive the medium are handed to the receiver immediately, in the order the
//! sender emitted its actions; this keeps a master's cycle timer ahead of the
//! device tick armed for the same instant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::pdu::{PairingIdentity, SessionKey};
use crate::stack::{
    device_step, master_step, smi_pair, smi_unpair, DeviceAction, DeviceEvent, DeviceId,
    DevicePhase, DeviceState, MasterAction, MasterEvent, MasterId, MasterState, PairingReply,
    ProtocolError, SessionGrant, TraceRecord,
};

use super::medium::{ChannelKind, Delivery, Medium};
use super::rng::{key_index, DrawKey, KeyedRng, Purpose};
use super::scenario::{HandoverOrder, LossTimestamp, ScenarioConfig};
use super::time::{quantize_duration, Micros, SimTime};
use super::EventQueue;

pub const DEVICE_ID: DeviceId = 1;

/// Port both masters assign to the roaming device.
pub fn device_port() -> PairingIdentity {
    PairingIdentity::new(0, 1).expect("valid port")
}

/// Process-data cycles the device runs on its first master before the
/// controller starts a handover.
pub const HANDOVER_SETTLE_CYCLES: u64 = 20;

#[derive(Debug)]
enum Ev {
    Device(DeviceEvent),
    Master(MasterId, MasterEvent),
    SmiPair(MasterId),
    SmiUnpair(MasterId),
}

/// Result of one traced repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// Quantized duration, or `None` when the repetition is discarded.
    pub duration: Option<Micros>,
    pub trace: Vec<TraceRecord>,
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    queue: EventQueue<Ev>,
    rng: KeyedRng,
    medium: Medium,
    device: DeviceState,
    masters: Vec<MasterState>,
    trace: Option<Vec<TraceRecord>>,
    target: DevicePhase,
    target_master: MasterId,
    completed: Option<SimTime>,
    last_delivery: [Option<SimTime>; 2],
    lost_at: [Option<SimTime>; 2],
}

fn master_name(m: MasterId) -> &'static str {
    ["master_A", "master_B"][usize::from(m)]
}

impl<'a> World<'a> {
    fn new(cfg: &'a ScenarioConfig, attempt: u64, medium: Medium, traced: bool) -> Self {
        Self {
            cfg,
            queue: EventQueue::new(),
            rng: KeyedRng::new(cfg.seed, attempt),
            medium,
            device: DeviceState::new(DEVICE_ID, cfg.safety),
            masters: vec![
                MasterState::new(0, cfg.safety),
                MasterState::new(1, cfg.safety),
            ],
            trace: traced.then(Vec::new),
            target: if cfg.safety {
                DevicePhase::SafetyOperational
            } else {
                DevicePhase::Connected
            },
            target_master: 0,
            completed: None,
            last_delivery: [None; 2],
            lost_at: [None; 2],
        }
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    fn push(&mut self, at: SimTime, ev: Ev) {
        self.queue
            .push(at, ev)
            .expect("engine only schedules at or after the current time");
    }

    fn record(&mut self, entity: &str, from: &str, to: &str, event: &str) {
        let at = self.now();
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                at,
                entity: entity.into(),
                from: from.into(),
                to: to.into(),
                event: event.into(),
            });
        }
    }

    /// Aligns master `m`'s beacon train so one beacon falls a random phase
    /// after `anchor`.
    fn start_beacons(&mut self, m: MasterId, anchor: SimTime) {
        let profile = &self.cfg.profile;
        let u = self
            .rng
            .uniform(DrawKey::new(Purpose::BeaconPhase, m, 0, 0, 0));
        let phase = profile.beacon_phase_us(u);
        let first = (anchor.as_micros() + phase) % profile.scan_dwell_us;
        self.push(SimTime(first), Ev::Master(m, MasterEvent::BeaconTimer));
    }

    fn run(&mut self, deadline: SimTime) -> Result<(), ProtocolError> {
        while self.completed.is_none() {
            match self.queue.peek_time() {
                Some(t) if t <= deadline => {}
                _ => break,
            }
            let (_, ev) = self.queue.pop().expect("peeked");
            match ev {
                Ev::Device(e) => self.device_event(e)?,
                Ev::Master(m, e) => {
                    let mut rng = self.rng.at(DrawKey::new(Purpose::Backoff, m, 0, 0, 0));
                    self.master_event(m, e, &mut rng)?
                }
                Ev::SmiPair(m) => {
                    smi_pair(&mut self.masters[usize::from(m)], DEVICE_ID, device_port())?;
                    self.record(master_name(m), "IDLE", "ENABLED", "smi_pair");
                }
                Ev::SmiUnpair(m) => {
                    smi_unpair(&mut self.masters[usize::from(m)], DEVICE_ID)?;
                    self.record(master_name(m), "PAIRED", "IDLE", "smi_unpair");
                }
            }
        }
        Ok(())
    }

    fn device_event(&mut self, event: DeviceEvent) -> Result<(), ProtocolError> {
        let now = self.now();
        let name = event.name();
        let actions = device_step(&mut self.device, event, now, &self.cfg.profile)?;
        for action in actions {
            match action {
                DeviceAction::Schedule { after, event } => {
                    self.push(now + after, Ev::Device(event));
                }
                DeviceAction::SendPairingRequest {
                    master,
                    attempt,
                    step,
                    try_index,
                } => self.pairing_request(master, attempt, step, try_index)?,
                DeviceAction::SendInput { master, frame } => {
                    let mut rng = self.rng.at(DrawKey::new(Purpose::Backoff, master, 0, 0, 0));
                    let input = MasterEvent::InputFrame {
                        device: DEVICE_ID,
                        frame,
                    };
                    self.master_event(master, input, &mut rng)?;
                }
                DeviceAction::Transition { from, to } => {
                    self.record("device", from.as_str(), to.as_str(), name);
                    if to == self.target
                        && self.device.current_master == Some(self.target_master)
                        && self.completed.is_none()
                    {
                        self.completed = Some(now);
                    }
                }
                DeviceAction::ConnectionLost { master, .. } => {
                    self.lost_at[usize::from(master)] = Some(now);
                }
            }
        }
        Ok(())
    }

    fn pairing_request(
        &mut self,
        master: MasterId,
        attempt: u32,
        step: u32,
        try_index: u32,
    ) -> Result<(), ProtocolError> {
        let key = DrawKey::new(
            Purpose::Handshake,
            master,
            key_index(attempt),
            key_index(step),
            key_index(try_index),
        );
        let mut rng = self.rng.at(key);
        let (u_loss, u_coll): (f64, f64) = (rng.random(), rng.random());
        let request = MasterEvent::PairingRequest {
            device: DEVICE_ID,
            attempt,
            step,
            try_index,
        };
        match self
            .medium
            .outcome(ChannelKind::Config, self.now(), u_loss, u_coll)
        {
            Delivery::Lost => Ok(()),
            Delivery::Delivered => self.master_event(master, request, &mut rng),
            Delivery::Collided => {
                let m = usize::from(master);
                self.masters[m].config_channel_busy = true;
                let result = self.master_event(master, request, &mut rng);
                self.masters[m].config_channel_busy = false;
                result
            }
        }
    }

    fn master_event(
        &mut self,
        m: MasterId,
        event: MasterEvent,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ProtocolError> {
        let now = self.now();
        let idx = usize::from(m);
        let actions = master_step(&mut self.masters[idx], event, now, &self.cfg.profile, rng)?;
        for action in actions {
            match action {
                MasterAction::Schedule { after, event } => {
                    self.push(now + after, Ev::Master(m, event));
                }
                MasterAction::SendBeacon { index, available } => {
                    let mut r =
                        self.rng
                            .at(DrawKey::new(Purpose::Beacon, m, key_index(index), 0, 0));
                    let (u_loss, u_coll): (f64, f64) = (r.random(), r.random());
                    if self
                        .medium
                        .outcome(ChannelKind::Config, now, u_loss, u_coll)
                        == Delivery::Delivered
                    {
                        self.device_event(DeviceEvent::Beacon {
                            master: m,
                            rssi_dbm: self.medium.rssi_dbm(),
                            available: available.contains(&DEVICE_ID),
                        })?;
                    }
                }
                MasterAction::SendPairingReply { reply, .. } => {
                    let event = match reply {
                        PairingReply::Ack { step, grant } => DeviceEvent::PairingAck {
                            master: m,
                            step,
                            grant,
                        },
                        PairingReply::Rejected => DeviceEvent::PairingRejected { master: m },
                        PairingReply::Collision { backoff_cycles } => DeviceEvent::Collision {
                            master: m,
                            backoff_cycles,
                        },
                    };
                    self.device_event(event)?;
                }
                MasterAction::SendOutput {
                    session,
                    cycle,
                    frame,
                    ..
                } => {
                    let key = DrawKey::new(
                        Purpose::Cycle,
                        m,
                        key_index(session),
                        key_index(cycle >> 16),
                        (cycle & 0xFFFF) as u16,
                    );
                    let u = self.rng.uniform(key);
                    if self.medium.outcome(ChannelKind::ProcessData, now, u, 1.0)
                        == Delivery::Delivered
                    {
                        if self.device.current_master == Some(m) {
                            self.last_delivery[idx] = Some(now);
                        }
                        self.device_event(DeviceEvent::OutputFrame { master: m, frame })?;
                    }
                }
                MasterAction::SessionOpened { .. } => {
                    self.record(master_name(m), "ENABLED", "PAIRED", "session_opened");
                }
                MasterAction::SafetyArmed { .. } => {
                    self.record(
                        master_name(m),
                        "PAIRED",
                        "SAFETY_ARMED",
                        "param_exchange_done",
                    );
                }
            }
        }
        Ok(())
    }
}

fn run_connect(
    cfg: &ScenarioConfig,
    attempt: u64,
    traced: bool,
) -> Result<Measurement, ProtocolError> {
    let schedule = cfg.schedule();
    let medium = Medium::new(
        cfg.attenuation_on_db,
        &cfg.rssi_map,
        cfg.per_curve,
        Some(schedule),
        false,
        &cfg.profile,
    );
    let mut w = World::new(cfg, attempt, medium, traced);
    w.masters.truncate(1);
    smi_pair(&mut w.masters[0], DEVICE_ID, device_port())?;
    w.start_beacons(0, schedule.on_edge(0));
    w.push(SimTime::ZERO, Ev::Device(DeviceEvent::Start));

    let windows = u64::from(cfg.max_on_windows);
    w.run(schedule.off_edge(windows - 1))?;

    let duration = w.completed.and_then(|t| {
        let inside = (0..windows).any(|k| schedule.on_edge(k) <= t && t <= schedule.off_edge(k));
        inside.then(|| quantize_duration((t - schedule.on_edge(0)) as i64).expect("non-negative"))
    });
    Ok(Measurement {
        duration,
        trace: w.trace.unwrap_or_default(),
    })
}

fn run_handover(
    cfg: &ScenarioConfig,
    attempt: u64,
    traced: bool,
) -> Result<Measurement, ProtocolError> {
    let profile = &cfg.profile;
    let medium = Medium::new(
        cfg.attenuation_on_db,
        &cfg.rssi_map,
        cfg.per_curve,
        None,
        cfg.contention,
        profile,
    );
    let mut w = World::new(cfg, attempt, medium, traced);
    // Alternate the direction between repetitions.
    let from: MasterId = (attempt % 2) as MasterId;
    let to = 1 - from;
    w.target_master = to;

    let key = SessionKey::random(&mut w.rng.at(DrawKey::new(Purpose::SessionKey, from, 0, 0, 0)));
    let old = &mut w.masters[usize::from(from)];
    smi_pair(old, DEVICE_ID, device_port())?;
    let cycle = old.open_session(DEVICE_ID, key, SimTime::ZERO, profile)?;
    old.arm_session(DEVICE_ID, profile);
    let MasterAction::Schedule { after, event } = cycle else {
        unreachable!("open_session yields the first cycle timer")
    };
    w.push(SimTime(after), Ev::Master(from, event));
    let grant = SessionGrant {
        key,
        identity: device_port(),
    };
    let (device, tick) =
        DeviceState::attached(DEVICE_ID, cfg.safety, from, grant, SimTime::ZERO, profile);
    w.device = device;
    w.last_delivery[usize::from(from)] = Some(SimTime::ZERO);
    if let DeviceAction::Schedule { after, event } = tick {
        w.push(SimTime(after), Ev::Device(event));
    }
    w.start_beacons(0, SimTime::ZERO);
    w.start_beacons(1, SimTime::ZERO);

    let unpair_at = SimTime(HANDOVER_SETTLE_CYCLES * profile.w_cycle_us);
    let pair_at = match cfg.handover_order {
        HandoverOrder::Simultaneous => unpair_at,
        HandoverOrder::Sequential => {
            unpair_at + profile.loss_detection_us() + profile.unpair_close_us
        }
    };
    w.push(unpair_at, Ev::SmiUnpair(from));
    w.push(pair_at, Ev::SmiPair(to));
    w.run(unpair_at + cfg.handover_window_us)?;

    let start = match cfg.loss_timestamp {
        LossTimestamp::LastDelivered => w.last_delivery[usize::from(from)],
        LossTimestamp::Detection => w.lost_at[usize::from(from)],
    };
    let duration = match (start, w.completed) {
        (Some(start), Some(end)) if end - start <= cfg.handover_window_us => {
            Some(quantize_duration((end - start) as i64).expect("non-negative"))
        }
        _ => None,
    };
    Ok(Measurement {
        duration,
        trace: w.trace.unwrap_or_default(),
    })
}

/// Time from the first attenuator ON edge to connected (or safety
/// operational), or `None` if no ON window within the limit produced a
/// connection.
pub fn measure_connect(
    cfg: &ScenarioConfig,
    attempt: u64,
) -> Result<Option<Micros>, ProtocolError> {
    Ok(run_connect(cfg, attempt, false)?.duration)
}

/// Time from loss of the old master to connected (or safety operational) on
/// the new one, or `None` if the handover window elapsed.
pub fn measure_handover(
    cfg: &ScenarioConfig,
    attempt: u64,
) -> Result<Option<Micros>, ProtocolError> {
    Ok(run_handover(cfg, attempt, false)?.duration)
}

/// Like [`measure_connect`] but also returns the transition trace.
pub fn trace_connect(cfg: &ScenarioConfig, attempt: u64) -> Result<Measurement, ProtocolError> {
    run_connect(cfg, attempt, true)
}

/// Like [`measure_handover`] but also returns the transition trace.
pub fn trace_handover(cfg: &ScenarioConfig, attempt: u64) -> Result<Measurement, ProtocolError> {
    run_handover(cfg, attempt, true)
}
