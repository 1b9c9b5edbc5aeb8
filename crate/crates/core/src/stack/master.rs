//! FS-W-Master: beaconing, roaming auto-pairing, cyclic process data and the
//! SMI pair/unpair commands used by a higher-level controller.

use std::collections::BTreeMap;

use rand::Rng;

use crate::pdu::{
    encode_output_pdu, ControlBits, ControlMCnt, PairingIdentity, SafetyReceiver, SessionKey,
    MAX_SLOTS,
};
use crate::sim::{Micros, SimTime};

use super::{DeviceId, MasterId, ProtocolError, Session, SessionGrant, TimingProfile};

/// Safety output payload carried in every process-data cycle.
pub const OUTPUT_PAYLOAD: [u8; 8] = [0xC3, 0, 0, 0, 0, 0, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackMode {
    Roaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortMode {
    RoamingAutoPairing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub mode: TrackMode,
    pub ports: Vec<PortMode>,
}

/// Master side of one paired device.
#[derive(Debug, Clone)]
pub struct MasterSession {
    pub identity: PairingIdentity,
    pub session: Session,
    /// Per-master session counter; identifies this session's cycle timers.
    pub index: u32,
    pub cycle: u32,
    pub params_done: u32,
    mcnt: ControlMCnt,
    receiver: Option<SafetyReceiver>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairingReply {
    Ack {
        step: u32,
        grant: Option<SessionGrant>,
    },
    Rejected,
    Collision {
        backoff_cycles: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterEvent {
    BeaconTimer,
    PairingRequest {
        device: DeviceId,
        attempt: u32,
        step: u32,
        try_index: u32,
    },
    /// Ends the handshake exchange: the reply goes out one W-cycle after the
    /// request.
    Respond {
        device: DeviceId,
        reply: PairingReply,
    },
    CycleTimer {
        device: DeviceId,
        session: u32,
    },
    InputFrame {
        device: DeviceId,
        frame: Vec<u8>,
    },
}

impl MasterEvent {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BeaconTimer => "beacon_timer",
            Self::PairingRequest { .. } => "pairing_request",
            Self::Respond { .. } => "respond",
            Self::CycleTimer { .. } => "cycle",
            Self::InputFrame { .. } => "input_frame",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MasterAction {
    Schedule {
        after: Micros,
        event: MasterEvent,
    },
    SendBeacon {
        index: u32,
        available: Vec<DeviceId>,
    },
    SendPairingReply {
        device: DeviceId,
        reply: PairingReply,
    },
    SendOutput {
        device: DeviceId,
        session: u32,
        cycle: u32,
        frame: Vec<u8>,
    },
    SessionOpened {
        device: DeviceId,
        session: u32,
    },
    SafetyArmed {
        device: DeviceId,
    },
}

#[derive(Debug, Clone)]
pub struct MasterState {
    pub id: MasterId,
    pub safety: bool,
    pub tracks: Vec<Track>,
    /// Devices admitted through SMI, with the port each one pairs on.
    pub enabled: BTreeMap<DeviceId, PairingIdentity>,
    pub paired: BTreeMap<DeviceId, MasterSession>,
    /// Set while another master occupies the configuration channels.
    pub config_channel_busy: bool,
    sessions_opened: u32,
    beacons_sent: u32,
}

impl MasterState {
    /// One roaming track with every port in roaming auto-pairing mode.
    pub fn new(id: MasterId, safety: bool) -> Self {
        Self {
            id,
            safety,
            tracks: vec![Track {
                mode: TrackMode::Roaming,
                ports: vec![PortMode::RoamingAutoPairing; usize::from(MAX_SLOTS)],
            }],
            enabled: BTreeMap::new(),
            paired: BTreeMap::new(),
            config_channel_busy: false,
            sessions_opened: 0,
            beacons_sent: 0,
        }
    }

    pub fn sessions_opened(&self) -> u32 {
        self.sessions_opened
    }

    fn port_exists(&self, port: PairingIdentity) -> bool {
        self.tracks
            .get(usize::from(port.track()))
            .is_some_and(|t| usize::from(port.slot()) < t.ports.len())
    }

    /// Installs a session as if pairing had just completed. Returns the first
    /// cycle timer to schedule.
    pub fn open_session(
        &mut self,
        device: DeviceId,
        key: SessionKey,
        now: SimTime,
        profile: &TimingProfile,
    ) -> Result<MasterAction, ProtocolError> {
        let identity = *self
            .enabled
            .get(&device)
            .ok_or(ProtocolError::UnknownDevice(device))?;
        self.sessions_opened += 1;
        let index = self.sessions_opened;
        let mut session = Session::new(key, now);
        session.safety_armed = false;
        self.paired.insert(
            device,
            MasterSession {
                identity,
                session,
                index,
                cycle: 0,
                params_done: 0,
                mcnt: ControlMCnt::default(),
                receiver: self.safety.then(|| SafetyReceiver::new(key, identity)),
            },
        );
        Ok(MasterAction::Schedule {
            after: profile.w_cycle_us,
            event: MasterEvent::CycleTimer {
                device,
                session: index,
            },
        })
    }

    /// Marks an opened session as having finished its parameter exchange.
    pub fn arm_session(&mut self, device: DeviceId, profile: &TimingProfile) {
        if let Some(s) = self.paired.get_mut(&device) {
            s.params_done = profile.safety_param_cycles;
            s.session.safety_armed = self.safety;
        }
    }
}

/// SMI: admit `device` for pairing on `port`.
pub fn smi_pair(
    master: &mut MasterState,
    device: DeviceId,
    port: PairingIdentity,
) -> Result<(), ProtocolError> {
    if !master.port_exists(port) {
        return Err(ProtocolError::SlotOccupied {
            port,
            reason: "no such port",
        });
    }
    match master.enabled.get(&device) {
        Some(&p) if p == port => {
            log::debug!(
                "master {}: device {device} already enabled on {port}",
                master.id
            );
            return Ok(());
        }
        Some(_) => {
            return Err(ProtocolError::SlotOccupied {
                port,
                reason: "device enabled on another port",
            })
        }
        None => {}
    }
    let taken = master.enabled.values().any(|&p| p == port)
        || master.paired.values().any(|s| s.identity == port);
    if taken {
        return Err(ProtocolError::SlotOccupied {
            port,
            reason: "port serves another device",
        });
    }
    master.enabled.insert(device, port);
    Ok(())
}

/// SMI: withdraw `device`, tearing down any session with it.
pub fn smi_unpair(master: &mut MasterState, device: DeviceId) -> Result<(), ProtocolError> {
    let was_enabled = master.enabled.remove(&device).is_some();
    let was_paired = master.paired.remove(&device).is_some();
    if was_enabled || was_paired {
        Ok(())
    } else {
        Err(ProtocolError::UnknownDevice(device))
    }
}

/// Advances the master by one event. `rng` supplies backoff and session key
/// draws for pairing requests.
pub fn master_step<R: Rng + ?Sized>(
    state: &mut MasterState,
    event: MasterEvent,
    now: SimTime,
    profile: &TimingProfile,
    rng: &mut R,
) -> Result<Vec<MasterAction>, ProtocolError> {
    let mut out = Vec::new();
    match event {
        MasterEvent::BeaconTimer => {
            state.beacons_sent += 1;
            out.push(MasterAction::Schedule {
                after: profile.scan_dwell_us,
                event: MasterEvent::BeaconTimer,
            });
            out.push(MasterAction::SendBeacon {
                index: state.beacons_sent,
                available: state.enabled.keys().copied().collect(),
            });
        }
        MasterEvent::PairingRequest { device, step, .. } => {
            let reply = if !state.enabled.contains_key(&device) {
                PairingReply::Rejected
            } else if state.config_channel_busy {
                PairingReply::Collision {
                    backoff_cycles: rng
                        .random_range(profile.backoff_min_cycles..=profile.backoff_max_cycles),
                }
            } else {
                let last = step + 1 >= profile.pairing_handshake_cycles;
                let grant = last.then(|| SessionGrant {
                    key: SessionKey::random(rng),
                    identity: state.enabled[&device],
                });
                PairingReply::Ack { step, grant }
            };
            out.push(MasterAction::Schedule {
                after: profile.w_cycle_us,
                event: MasterEvent::Respond { device, reply },
            });
        }
        MasterEvent::Respond { device, reply } => {
            if let PairingReply::Ack {
                grant: Some(grant), ..
            } = &reply
            {
                // Unpaired while the final exchange was in flight.
                if state.enabled.get(&device) != Some(&grant.identity) {
                    out.push(MasterAction::SendPairingReply {
                        device,
                        reply: PairingReply::Rejected,
                    });
                    return Ok(out);
                }
                // The first cycle timer must be queued before the device
                // arms its own tick so that cycle frames precede ticks.
                let timer = state.open_session(device, grant.key, now, profile)?;
                out.push(timer);
                out.push(MasterAction::SessionOpened {
                    device,
                    session: state.sessions_opened,
                });
            }
            out.push(MasterAction::SendPairingReply { device, reply });
        }
        MasterEvent::CycleTimer { device, session } => {
            let safety = state.safety;
            let Some(s) = state.paired.get_mut(&device).filter(|s| s.index == session) else {
                return Ok(out);
            };
            s.cycle += 1;
            s.mcnt = s.mcnt.next();
            out.push(MasterAction::Schedule {
                after: profile.w_cycle_us,
                event: MasterEvent::CycleTimer { device, session },
            });
            let frame = if safety {
                let control = if s.params_done < profile.safety_param_cycles {
                    ControlBits::PARAM_EXCHANGE
                } else {
                    ControlBits::DATA
                };
                encode_output_pdu(
                    &OUTPUT_PAYLOAD,
                    s.mcnt.with_control(control),
                    s.identity,
                    &s.session.key,
                )
                .expect("fixed-size output frame encodes")
            } else {
                OUTPUT_PAYLOAD.to_vec()
            };
            out.push(MasterAction::SendOutput {
                device,
                session,
                cycle: s.cycle,
                frame,
            });
        }
        MasterEvent::InputFrame { device, frame } => {
            let Some(s) = state.paired.get_mut(&device) else {
                return Ok(out);
            };
            if let Some(rx) = s.receiver.as_mut() {
                if let Err(err) = rx.accept_input(&frame) {
                    log::debug!("master {} dropped input frame: {err}", state.id);
                    return Ok(out);
                }
                if s.params_done < profile.safety_param_cycles {
                    s.params_done += 1;
                    if s.params_done == profile.safety_param_cycles {
                        s.session.safety_armed = true;
                        out.push(MasterAction::SafetyArmed { device });
                    }
                }
            }
        }
    }
    Ok(out)
}
