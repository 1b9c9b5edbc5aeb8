//! 16-bit frame check sequence.
//!
//! Polynomial 0x1021, initial value 0xFFFF, no input or output reflection and
//! no final xor (CRC-16/IBM-3740, also known as CRC-16/CCITT-FALSE).

use crc::{Crc, CRC_16_IBM_3740};

use super::PduError;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// Check value of the CRC variant over the ASCII digits `"123456789"`.
pub const CHECK_VALUE: u16 = 0x29B1;

/// Computes the 2-octet checksum of `data` (big-endian on the wire).
pub fn compute_crc(data: &[u8]) -> Result<[u8; 2], PduError> {
    if data.is_empty() {
        return Err(PduError::InvalidLength {
            field: "crc input",
            len: 0,
        });
    }
    Ok(CRC16.checksum(data).to_be_bytes())
}

/// Bitwise shift-and-xor reference used by the tests as an independent
/// oracle for the table-driven implementation above.
#[cfg(test)]
pub(crate) fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}
