//! IOLWS safety process data units: layout, CRC and MAC protection,
//! verification, and residual-error estimation.

pub mod corpus;
pub mod crc;
pub mod frame;
pub mod mac;
pub mod residual;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use self::crc::compute_crc;
pub use frame::{
    decode_input_pdu, decode_output_pdu, encode_input_pdu, encode_output_pdu, Codec, ControlBits,
    ControlMCnt, CounterWindow, PairingIdentity, SafetyInputPdu, SafetyOutputPdu, SafetyReceiver,
    Verification, DEFAULT_COUNTER_SPAN, FRAME_OVERHEAD, INPUT_SAFETY_FRAME, INPUT_SAFETY_LEN,
    MAX_NONSAFETY_LEN, MAX_OUTPUT_FRAME, MAX_OUTPUT_PAYLOAD, MAX_SLOTS, MAX_TRACKS, MCNT_MODULUS,
};
pub use mac::{compute_mac, HmacSha256, MacAlgorithm, SessionKey};
pub use residual::{estimate_undetected_rate, ResidualEstimate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PduError {
    #[error("invalid length {len} for {field}")]
    InvalidLength { field: &'static str, len: usize },
    #[error("payload of {len} octets exceeds the 22-octet limit")]
    PayloadTooLong { len: usize },
    #[error("CRC mismatch")]
    CrcFail,
    #[error("MAC mismatch")]
    MacFail,
    #[error("track/slot does not match the paired identity")]
    AuthMismatch,
    #[error("message counter {mcnt} outside the acceptance window")]
    StaleCounter { mcnt: u16 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Outcome tokens used in frame corpora and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeOutcome {
    Ok,
    CrcFail,
    MacFail,
    AuthMismatch,
    StaleCounter,
}

impl DecodeOutcome {
    pub fn of<T>(result: &Result<T, PduError>) -> Option<Self> {
        match result {
            Ok(_) => Some(Self::Ok),
            Err(PduError::CrcFail) => Some(Self::CrcFail),
            Err(PduError::MacFail) => Some(Self::MacFail),
            Err(PduError::AuthMismatch) => Some(Self::AuthMismatch),
            Err(PduError::StaleCounter { .. }) => Some(Self::StaleCounter),
            Err(_) => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "OK",
            Self::CrcFail => "CRC_FAIL",
            Self::MacFail => "MAC_FAIL",
            Self::AuthMismatch => "AUTH_MISMATCH",
            Self::StaleCounter => "STALE_COUNTER",
        }
    }
}

impl fmt::Display for DecodeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecodeOutcome {
    type Err = PduError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "OK" => Self::Ok,
            "CRC_FAIL" => Self::CrcFail,
            "MAC_FAIL" => Self::MacFail,
            "AUTH_MISMATCH" => Self::AuthMismatch,
            "STALE_COUNTER" => Self::StaleCounter,
            other => {
                return Err(PduError::InvalidParameter(format!(
                    "unknown decode outcome `{other}`"
                )))
            }
        })
    }
}
