//! Keyed message authentication for the security layer.

use hmac::{Hmac, Mac};
use rand::Rng;
use sha2::Sha256;

/// Length of the truncated tag carried in every safety PDU.
pub const TAG_LEN: usize = 4;

/// 128-bit key shared by both endpoints of a pairing.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionKey([u8; 16]);

impl SessionKey {
    pub const fn new(key_material: [u8; 16]) -> Self {
        Self(key_material)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random())
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

// Key material stays out of logs and traces.
impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKey(..)")
    }
}

/// A keyed MAC whose output is truncated to [`TAG_LEN`] octets.
pub trait MacAlgorithm: Send + Sync {
    fn tag(&self, key: &SessionKey, data: &[u8]) -> [u8; TAG_LEN];
}

/// HMAC-SHA-256 truncated to the leading four octets.
#[derive(Debug, Clone, Copy, Default)]
pub struct HmacSha256;

impl MacAlgorithm for HmacSha256 {
    fn tag(&self, key: &SessionKey, data: &[u8]) -> [u8; TAG_LEN] {
        let mut mac =
            <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes()).expect("any key length is valid");
        mac.update(data);
        let digest = mac.finalize().into_bytes();
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&digest[..TAG_LEN]);
        tag
    }
}

/// Computes the truncated tag with the default algorithm.
pub fn compute_mac(key: &SessionKey, data: &[u8]) -> [u8; TAG_LEN] {
    HmacSha256.tag(key, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn deterministic() {
        let key = SessionKey::new([7; 16]);
        assert_eq!(compute_mac(&key, b"frame"), compute_mac(&key, b"frame"));
    }

    #[test]
    fn matches_rfc4231_prefix() {
        // RFC 4231 test case 2, truncated to four octets.
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(b"Jefe").unwrap();
        mac.update(b"what do ya want for nothing?");
        let digest = mac.finalize().into_bytes();
        assert_eq!(hex::encode(&digest[..4]), "5bdcc146");
    }

    #[test]
    fn key_separation_over_random_key_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let data = [0xA5u8; 28];
        let mut collisions = 0;
        for _ in 0..1_000 {
            let a = SessionKey::random(&mut rng);
            let b = SessionKey::random(&mut rng);
            if a != b && compute_mac(&a, &data) == compute_mac(&b, &data) {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn every_single_bit_flip_changes_the_tag() {
        let key = SessionKey::new(*b"0123456789abcdef");
        let message: Vec<u8> = (0..28u8).map(|i| i.wrapping_mul(37)).collect();
        let reference = compute_mac(&key, &message);
        let mut tags = HashSet::new();
        let mut flipped = message.clone();
        for bit in 0..message.len() * 8 {
            flipped[bit / 8] ^= 1 << (bit % 8);
            let tag = compute_mac(&key, &flipped);
            assert_ne!(tag, reference, "bit {bit}");
            tags.insert(tag);
            flipped[bit / 8] ^= 1 << (bit % 8);
        }
        assert_eq!(tags.len(), 28 * 8);
    }

    #[test]
    fn debug_hides_key_material() {
        assert_eq!(format!("{:?}", SessionKey::new([1; 16])), "SessionKey(..)");
    }
}
