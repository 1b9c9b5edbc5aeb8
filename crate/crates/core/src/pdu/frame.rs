//! Safety PDU layout and codec.
//!
//! Output (master to device) frame, big-endian:
//!
//! ```text
//! +---------------+----------+-------------------+---------+--------+
//! | Control&MCnt  | Track    | safety data       | MAC     | CRC    |
//! | 4 bit + 12 bit| + Slot   | 1..=22 octets     | 4 oct.  | 2 oct. |
//! +---------------+----------+-------------------+---------+--------+
//! ```
//!
//! The input (device to master) frame carries exactly six octets of safety
//! data and may append up to 16 octets of non-safety data after the CRC. The
//! non-safety bytes are covered by neither MAC nor CRC.

use bitflags::bitflags;

use super::crc::compute_crc;
use super::mac::{HmacSha256, MacAlgorithm, SessionKey, TAG_LEN};
use super::PduError;

pub const MAX_OUTPUT_PAYLOAD: usize = 22;
pub const INPUT_SAFETY_LEN: usize = 6;
pub const MAX_NONSAFETY_LEN: usize = 16;
pub const CONTROL_LEN: usize = 2;
pub const IDENTITY_LEN: usize = 2;
pub const CRC_LEN: usize = 2;
/// Octets added to the safety payload by every frame.
pub const FRAME_OVERHEAD: usize = CONTROL_LEN + IDENTITY_LEN + TAG_LEN + CRC_LEN;
pub const MIN_OUTPUT_FRAME: usize = 1 + FRAME_OVERHEAD;
pub const MAX_OUTPUT_FRAME: usize = MAX_OUTPUT_PAYLOAD + FRAME_OVERHEAD;
pub const INPUT_SAFETY_FRAME: usize = INPUT_SAFETY_LEN + FRAME_OVERHEAD;

pub const MCNT_MODULUS: u16 = 1 << 12;
pub const DEFAULT_COUNTER_SPAN: u16 = 16;

pub const MAX_TRACKS: u8 = 5;
pub const MAX_SLOTS: u8 = 8;

bitflags! {
    /// Frame role flags in the upper nibble of Control&MCnt.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct ControlBits: u8 {
        const DATA = 0b0001;
        const PARAM_EXCHANGE = 0b0010;
        const REARM = 0b0100;
    }
}

/// Control bits plus the 12-bit message counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ControlMCnt {
    control: ControlBits,
    mcnt: u16,
}

impl ControlMCnt {
    pub fn new(control: ControlBits, mcnt: u16) -> Result<Self, PduError> {
        if mcnt >= MCNT_MODULUS {
            return Err(PduError::InvalidParameter(format!(
                "message counter {mcnt} exceeds 12 bits"
            )));
        }
        Ok(Self { control, mcnt })
    }

    pub fn control(&self) -> ControlBits {
        self.control
    }

    pub fn mcnt(&self) -> u16 {
        self.mcnt
    }

    /// Same control bits, counter advanced by one modulo 2^12.
    pub fn next(&self) -> Self {
        Self {
            control: self.control,
            mcnt: (self.mcnt + 1) % MCNT_MODULUS,
        }
    }

    pub fn with_control(&self, control: ControlBits) -> Self {
        Self { control, ..*self }
    }

    pub fn to_bytes(self) -> [u8; CONTROL_LEN] {
        (((self.control.bits() as u16) << 12) | self.mcnt).to_be_bytes()
    }

    pub fn from_bytes(bytes: [u8; CONTROL_LEN]) -> Self {
        let raw = u16::from_be_bytes(bytes);
        Self {
            control: ControlBits::from_bits_retain((raw >> 12) as u8),
            mcnt: raw & (MCNT_MODULUS - 1),
        }
    }
}

/// Track/slot addressing of a device connection, used as the authenticity
/// identifier of the safety layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairingIdentity {
    track: u8,
    slot: u8,
}

impl PairingIdentity {
    pub fn new(track: u8, slot: u8) -> Result<Self, PduError> {
        if track >= MAX_TRACKS || slot >= MAX_SLOTS {
            return Err(PduError::InvalidParameter(format!(
                "track {track} / slot {slot} outside {MAX_TRACKS} tracks x {MAX_SLOTS} slots"
            )));
        }
        Ok(Self { track, slot })
    }

    pub fn track(&self) -> u8 {
        self.track
    }

    pub fn slot(&self) -> u8 {
        self.slot
    }

    pub fn to_bytes(self) -> [u8; IDENTITY_LEN] {
        [self.track, self.slot]
    }
}

impl std::fmt::Display for PairingIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.track, self.slot)
    }
}

/// Inclusive range of acceptable message counters, modulo 2^12.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterWindow {
    lower: u16,
    upper: u16,
}

impl CounterWindow {
    /// Accepts every counter value; used for the first frame of a session.
    pub const OPEN: Self = Self {
        lower: 0,
        upper: MCNT_MODULUS - 1,
    };

    /// Counters strictly newer than `last_accepted`, at most `span` ahead.
    pub fn after(last_accepted: u16, span: u16) -> Self {
        let span = span.clamp(1, MCNT_MODULUS - 1);
        Self {
            lower: (last_accepted + 1) % MCNT_MODULUS,
            upper: (last_accepted + span) % MCNT_MODULUS,
        }
    }

    pub fn bounds(&self) -> (u16, u16) {
        (self.lower, self.upper)
    }

    pub fn contains(&self, mcnt: u16) -> bool {
        let width = (self.upper + MCNT_MODULUS - self.lower) % MCNT_MODULUS;
        let offset = (mcnt + MCNT_MODULUS - self.lower) % MCNT_MODULUS;
        offset <= width
    }
}

/// Decoded output frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyOutputPdu {
    pub safety_data: Vec<u8>,
    pub control_mcnt: ControlMCnt,
    pub identity: PairingIdentity,
    pub mac: [u8; TAG_LEN],
    pub crc: [u8; CRC_LEN],
}

/// Decoded input frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyInputPdu {
    pub safety_data: [u8; INPUT_SAFETY_LEN],
    pub nonsafety_data: Vec<u8>,
    pub control_mcnt: ControlMCnt,
    pub identity: PairingIdentity,
    pub mac: [u8; TAG_LEN],
    pub crc: [u8; CRC_LEN],
}

/// Which checks a receiver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Verification {
    #[default]
    Full,
    /// Only the CRC is checked. Exists so residual-error estimates can be
    /// compared against the bare CRC detection strength.
    CrcOnly,
}

/// Frame codec with a pluggable MAC.
#[derive(Debug, Clone, Default)]
pub struct Codec<M = HmacSha256> {
    mac: M,
    verification: Verification,
}

impl Codec<HmacSha256> {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<M: MacAlgorithm> Codec<M> {
    pub fn with_mac(mac: M) -> Self {
        Self {
            mac,
            verification: Verification::Full,
        }
    }

    pub fn verification(mut self, verification: Verification) -> Self {
        self.verification = verification;
        self
    }

    pub fn encode_output(
        &self,
        payload: &[u8],
        ctl: ControlMCnt,
        id: PairingIdentity,
        key: &SessionKey,
    ) -> Result<Vec<u8>, PduError> {
        if payload.is_empty() {
            return Err(PduError::InvalidLength {
                field: "output payload",
                len: 0,
            });
        }
        if payload.len() > MAX_OUTPUT_PAYLOAD {
            return Err(PduError::PayloadTooLong { len: payload.len() });
        }
        let mut frame = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
        frame.extend_from_slice(&ctl.to_bytes());
        frame.extend_from_slice(&id.to_bytes());
        frame.extend_from_slice(payload);
        self.seal(&mut frame, key)?;
        Ok(frame)
    }

    pub fn decode_output(
        &self,
        frame: &[u8],
        key: &SessionKey,
        expected_id: PairingIdentity,
        window: CounterWindow,
    ) -> Result<SafetyOutputPdu, PduError> {
        if frame.len() < MIN_OUTPUT_FRAME {
            return Err(PduError::InvalidLength {
                field: "output frame",
                len: frame.len(),
            });
        }
        if frame.len() > MAX_OUTPUT_FRAME {
            return Err(PduError::PayloadTooLong {
                len: frame.len() - FRAME_OVERHEAD,
            });
        }
        let (ctl, id, mac, crc) = self.verify(frame, key, expected_id, window)?;
        Ok(SafetyOutputPdu {
            safety_data: frame[CONTROL_LEN + IDENTITY_LEN..frame.len() - TAG_LEN - CRC_LEN]
                .to_vec(),
            control_mcnt: ctl,
            identity: id,
            mac,
            crc,
        })
    }

    pub fn encode_input(
        &self,
        safety: &[u8],
        nonsafety: &[u8],
        ctl: ControlMCnt,
        id: PairingIdentity,
        key: &SessionKey,
    ) -> Result<Vec<u8>, PduError> {
        if safety.len() != INPUT_SAFETY_LEN {
            return Err(PduError::InvalidLength {
                field: "input safety data",
                len: safety.len(),
            });
        }
        if nonsafety.len() > MAX_NONSAFETY_LEN {
            return Err(PduError::InvalidLength {
                field: "input non-safety data",
                len: nonsafety.len(),
            });
        }
        let mut frame = Vec::with_capacity(INPUT_SAFETY_FRAME + nonsafety.len());
        frame.extend_from_slice(&ctl.to_bytes());
        frame.extend_from_slice(&id.to_bytes());
        frame.extend_from_slice(safety);
        self.seal(&mut frame, key)?;
        frame.extend_from_slice(nonsafety);
        Ok(frame)
    }

    pub fn decode_input(
        &self,
        frame: &[u8],
        key: &SessionKey,
        expected_id: PairingIdentity,
        window: CounterWindow,
    ) -> Result<SafetyInputPdu, PduError> {
        if frame.len() < INPUT_SAFETY_FRAME || frame.len() > INPUT_SAFETY_FRAME + MAX_NONSAFETY_LEN
        {
            return Err(PduError::InvalidLength {
                field: "input frame",
                len: frame.len(),
            });
        }
        let (safety_part, nonsafety) = frame.split_at(INPUT_SAFETY_FRAME);
        let (ctl, id, mac, crc) = self.verify(safety_part, key, expected_id, window)?;
        let mut safety_data = [0u8; INPUT_SAFETY_LEN];
        safety_data.copy_from_slice(&safety_part[CONTROL_LEN + IDENTITY_LEN..][..INPUT_SAFETY_LEN]);
        Ok(SafetyInputPdu {
            safety_data,
            nonsafety_data: nonsafety.to_vec(),
            control_mcnt: ctl,
            identity: id,
            mac,
            crc,
        })
    }

    /// Appends MAC and CRC to `frame`, which holds the covered header and data.
    fn seal(&self, frame: &mut Vec<u8>, key: &SessionKey) -> Result<(), PduError> {
        let tag = self.mac.tag(key, frame);
        frame.extend_from_slice(&tag);
        let crc = compute_crc(frame)?;
        frame.extend_from_slice(&crc);
        Ok(())
    }

    /// Checks a sealed region (header, data, MAC, CRC) in the order CRC,
    /// identity, MAC, counter.
    #[allow(clippy::type_complexity)]
    fn verify(
        &self,
        sealed: &[u8],
        key: &SessionKey,
        expected_id: PairingIdentity,
        window: CounterWindow,
    ) -> Result<(ControlMCnt, PairingIdentity, [u8; TAG_LEN], [u8; CRC_LEN]), PduError> {
        let crc_at = sealed.len() - CRC_LEN;
        let mac_at = crc_at - TAG_LEN;
        let crc: [u8; CRC_LEN] = sealed[crc_at..].try_into().expect("length checked");
        let mac: [u8; TAG_LEN] = sealed[mac_at..crc_at].try_into().expect("length checked");
        let ctl = ControlMCnt::from_bytes([sealed[0], sealed[1]]);

        if compute_crc(&sealed[..crc_at])? != crc {
            return Err(PduError::CrcFail);
        }
        if self.verification == Verification::CrcOnly {
            return Ok((ctl, expected_id, mac, crc));
        }
        if [sealed[2], sealed[3]] != expected_id.to_bytes() {
            return Err(PduError::AuthMismatch);
        }
        if self.mac.tag(key, &sealed[..mac_at]) != mac {
            return Err(PduError::MacFail);
        }
        if !window.contains(ctl.mcnt()) {
            return Err(PduError::StaleCounter { mcnt: ctl.mcnt() });
        }
        Ok((ctl, expected_id, mac, crc))
    }
}

pub fn encode_output_pdu(
    payload: &[u8],
    ctl: ControlMCnt,
    id: PairingIdentity,
    key: &SessionKey,
) -> Result<Vec<u8>, PduError> {
    Codec::new().encode_output(payload, ctl, id, key)
}

pub fn decode_output_pdu(
    frame: &[u8],
    key: &SessionKey,
    expected_id: PairingIdentity,
    window: CounterWindow,
) -> Result<SafetyOutputPdu, PduError> {
    Codec::new().decode_output(frame, key, expected_id, window)
}

pub fn encode_input_pdu(
    safety: &[u8],
    nonsafety: &[u8],
    ctl: ControlMCnt,
    id: PairingIdentity,
    key: &SessionKey,
) -> Result<Vec<u8>, PduError> {
    Codec::new().encode_input(safety, nonsafety, ctl, id, key)
}

pub fn decode_input_pdu(
    frame: &[u8],
    key: &SessionKey,
    expected_id: PairingIdentity,
    window: CounterWindow,
) -> Result<SafetyInputPdu, PduError> {
    Codec::new().decode_input(frame, key, expected_id, window)
}

/// Receiving end of one safety session: tracks the last accepted counter so
/// replays and stale frames are rejected.
#[derive(Debug, Clone)]
pub struct SafetyReceiver {
    key: SessionKey,
    identity: PairingIdentity,
    last_accepted: Option<u16>,
    span: u16,
}

impl SafetyReceiver {
    pub fn new(key: SessionKey, identity: PairingIdentity) -> Self {
        Self {
            key,
            identity,
            last_accepted: None,
            span: DEFAULT_COUNTER_SPAN,
        }
    }

    pub fn last_accepted(&self) -> Option<u16> {
        self.last_accepted
    }

    pub fn window(&self) -> CounterWindow {
        match self.last_accepted {
            Some(last) => CounterWindow::after(last, self.span),
            None => CounterWindow::OPEN,
        }
    }

    pub fn accept_output(&mut self, frame: &[u8]) -> Result<SafetyOutputPdu, PduError> {
        let pdu = decode_output_pdu(frame, &self.key, self.identity, self.window())?;
        self.last_accepted = Some(pdu.control_mcnt.mcnt());
        Ok(pdu)
    }

    pub fn accept_input(&mut self, frame: &[u8]) -> Result<SafetyInputPdu, PduError> {
        let pdu = decode_input_pdu(frame, &self.key, self.identity, self.window())?;
        self.last_accepted = Some(pdu.control_mcnt.mcnt());
        Ok(pdu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn key() -> SessionKey {
        SessionKey::new(*b"\x00\x11\x22\x33\x44\x55\x66\x77\x88\x99\xAA\xBB\xCC\xDD\xEE\xFF")
    }

    fn id() -> PairingIdentity {
        PairingIdentity::new(2, 5).unwrap()
    }

    fn ctl(mcnt: u16) -> ControlMCnt {
        ControlMCnt::new(ControlBits::DATA, mcnt).unwrap()
    }

    #[test]
    fn control_field_packs_nibble_and_counter() {
        let c = ControlMCnt::new(ControlBits::PARAM_EXCHANGE | ControlBits::REARM, 0xABC).unwrap();
        assert_eq!(c.to_bytes(), [0x6A, 0xBC]);
        assert_eq!(ControlMCnt::from_bytes([0x6A, 0xBC]), c);
        assert!(ControlMCnt::new(ControlBits::DATA, 4096).is_err());
    }

    #[test]
    fn counter_wraps_modulo_4096() {
        assert_eq!(ctl(4095).next().mcnt(), 0);
        assert_eq!(ctl(7).next().mcnt(), 8);
    }

    #[test]
    fn identity_bounds() {
        assert!(PairingIdentity::new(4, 7).is_ok());
        assert!(PairingIdentity::new(5, 0).is_err());
        assert!(PairingIdentity::new(0, 8).is_err());
    }

    #[test]
    fn window_is_strictly_newer_and_bounded() {
        let w = CounterWindow::after(10, 16);
        assert_eq!(w.bounds(), (11, 26));
        assert!(!w.contains(10));
        assert!(w.contains(11));
        assert!(w.contains(26));
        assert!(!w.contains(27));
        let wrapped = CounterWindow::after(4090, 16);
        assert!(wrapped.contains(4095));
        assert!(wrapped.contains(0));
        assert!(wrapped.contains(10));
        assert!(!wrapped.contains(11));
        assert!(!wrapped.contains(4090));
        assert!(CounterWindow::OPEN.contains(0) && CounterWindow::OPEN.contains(4095));
    }

    #[test]
    fn full_payload_gives_32_octet_frame() {
        let frame = encode_output_pdu(&[0x5A; 22], ctl(1), id(), &key()).unwrap();
        assert_eq!(frame.len(), 32);
        assert_eq!(&frame[..4], &[0x10, 0x01, 2, 5]);
    }

    #[test]
    fn payload_bounds() {
        assert_eq!(
            encode_output_pdu(&[0; 23], ctl(1), id(), &key()),
            Err(PduError::PayloadTooLong { len: 23 })
        );
        assert!(matches!(
            encode_output_pdu(&[], ctl(1), id(), &key()),
            Err(PduError::InvalidLength { .. })
        ));
    }

    #[test]
    fn round_trip_random_payloads() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000 {
            let len = rng.random_range(1..=22);
            let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let mcnt = rng.random_range(0..4096);
            let frame = encode_output_pdu(&payload, ctl(mcnt), id(), &key()).unwrap();
            assert_eq!(frame.len(), len + FRAME_OVERHEAD);
            let pdu = decode_output_pdu(&frame, &key(), id(), CounterWindow::OPEN).unwrap();
            assert_eq!(pdu.safety_data, payload);
            assert_eq!(pdu.control_mcnt.mcnt(), mcnt);
        }
    }

    #[test]
    fn every_single_bit_flip_is_a_crc_failure() {
        let frame = encode_output_pdu(b"emergency-stop", ctl(3), id(), &key()).unwrap();
        for bit in 0..frame.len() * 8 {
            let mut corrupted = frame.clone();
            corrupted[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(
                decode_output_pdu(&corrupted, &key(), id(), CounterWindow::OPEN),
                Err(PduError::CrcFail),
                "bit {bit}"
            );
        }
    }

    #[test]
    fn check_order_is_crc_identity_mac_counter() {
        let frame = encode_output_pdu(&[1, 2, 3], ctl(20), id(), &key()).unwrap();
        let other = PairingIdentity::new(0, 0).unwrap();
        let wrong_key = SessionKey::new([0xEE; 16]);
        let stale = CounterWindow::after(20, 16);

        // Wrong identity, key and counter all at once: identity is reported.
        assert_eq!(
            decode_output_pdu(&frame, &wrong_key, other, stale),
            Err(PduError::AuthMismatch)
        );
        assert_eq!(
            decode_output_pdu(&frame, &wrong_key, id(), stale),
            Err(PduError::MacFail)
        );
        assert_eq!(
            decode_output_pdu(&frame, &key(), id(), stale),
            Err(PduError::StaleCounter { mcnt: 20 })
        );
    }

    #[test]
    fn manipulation_with_fixed_crc_is_a_mac_failure() {
        // An attacker who recomputes the CRC but lacks the key.
        let frame = encode_output_pdu(&[9; 8], ctl(5), id(), &key()).unwrap();
        let crc_at = frame.len() - CRC_LEN;
        for bit in 0..(crc_at - TAG_LEN) * 8 {
            if bit / 8 == 2 || bit / 8 == 3 {
                continue;
            }
            let mut forged = frame[..crc_at].to_vec();
            forged[bit / 8] ^= 1 << (bit % 8);
            let crc = compute_crc(&forged).unwrap();
            forged.extend_from_slice(&crc);
            let result = decode_output_pdu(&forged, &key(), id(), CounterWindow::OPEN);
            assert_eq!(result, Err(PduError::MacFail), "bit {bit}");
        }
    }

    #[test]
    fn replay_is_stale() {
        let mut rx = SafetyReceiver::new(key(), id());
        let first = encode_output_pdu(&[1], ctl(100), id(), &key()).unwrap();
        rx.accept_output(&first).unwrap();
        assert_eq!(
            rx.accept_output(&first),
            Err(PduError::StaleCounter { mcnt: 100 })
        );
        let next = encode_output_pdu(&[1], ctl(101), id(), &key()).unwrap();
        assert!(rx.accept_output(&next).is_ok());
        let too_far = encode_output_pdu(&[1], ctl(118), id(), &key()).unwrap();
        assert_eq!(
            rx.accept_output(&too_far),
            Err(PduError::StaleCounter { mcnt: 118 })
        );
    }

    #[test]
    fn input_nonsafety_bytes_are_not_protected() {
        let safety = [1, 2, 3, 4, 5, 6];
        let a = encode_input_pdu(&safety, &[0xAA; 4], ctl(9), id(), &key()).unwrap();
        let b = encode_input_pdu(&safety, &[0x55; 4], ctl(9), id(), &key()).unwrap();
        assert_eq!(a[..INPUT_SAFETY_FRAME], b[..INPUT_SAFETY_FRAME]);
        assert_ne!(a, b);

        let mut corrupted = a.clone();
        *corrupted.last_mut().unwrap() ^= 0xFF;
        let pdu = decode_input_pdu(&corrupted, &key(), id(), CounterWindow::OPEN).unwrap();
        assert_eq!(pdu.safety_data, safety);
        assert_eq!(pdu.nonsafety_data, vec![0xAA, 0xAA, 0xAA, 0x55]);
    }

    #[test]
    fn input_lengths() {
        assert!(matches!(
            encode_input_pdu(&[0; 5], &[], ctl(0), id(), &key()),
            Err(PduError::InvalidLength { .. })
        ));
        assert!(matches!(
            encode_input_pdu(&[0; 6], &[0; 17], ctl(0), id(), &key()),
            Err(PduError::InvalidLength { .. })
        ));
        let frame = encode_input_pdu(&[0; 6], &[], ctl(0), id(), &key()).unwrap();
        assert_eq!(frame.len(), 16);
    }

    #[test]
    fn crc_only_hook_skips_authentication() {
        let frame = encode_output_pdu(&[4; 4], ctl(1), id(), &key()).unwrap();
        let codec = Codec::new().verification(Verification::CrcOnly);
        let wrong_key = SessionKey::new([0; 16]);
        assert!(codec
            .decode_output(&frame, &wrong_key, id(), CounterWindow::after(1, 16))
            .is_ok());
    }
}
