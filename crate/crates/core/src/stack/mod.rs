//! Master and device state machines of the wireless safety stack.

mod device;
mod master;
mod session;
mod timing;
mod trace;

pub use device::{
    device_step, DeviceAction, DeviceEvent, DevicePhase, DeviceState, NONSAFETY_INPUT,
};
pub use master::{
    master_step, smi_pair, smi_unpair, MasterAction, MasterEvent, MasterSession, MasterState,
    PairingReply, PortMode, Track, TrackMode, OUTPUT_PAYLOAD,
};
pub use session::{safety_connection_establish, Session};
pub use timing::{JitterShape, TimingProfile};
pub use trace::TraceRecord;

use thiserror::Error;

use crate::pdu::{PairingIdentity, SessionKey};

pub type MasterId = u8;
pub type DeviceId = u32;

/// Session material handed to the device with the final pairing ack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionGrant {
    pub key: SessionKey,
    pub identity: PairingIdentity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol violation: event {event} in phase {phase}")]
    ProtocolViolation {
        phase: &'static str,
        event: &'static str,
    },
    #[error("port {port} unavailable: {reason}")]
    SlotOccupied {
        port: PairingIdentity,
        reason: &'static str,
    },
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("connection lost")]
    ConnectionLost,
    #[error("invalid timing profile: {0}")]
    InvalidProfile(String),
}
