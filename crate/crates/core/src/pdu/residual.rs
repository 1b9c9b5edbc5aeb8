//! Monte Carlo estimate of the undetected-error rate of the safety layer
//! over a binary symmetric channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use super::frame::{Codec, ControlBits, ControlMCnt, CounterWindow, PairingIdentity, Verification};
use super::mac::SessionKey;
use super::PduError;

pub const MIN_TRIALS: u64 = 10_000;

/// Number of distinct valid frames cycled through by the estimator.
const FRAME_POOL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEstimate {
    pub trials: u64,
    /// Frames that differed from the transmitted frame after the channel.
    pub corrupted: u64,
    /// Corrupted frames the receiver nevertheless accepted.
    pub undetected: u64,
}

impl ResidualEstimate {
    pub fn rate(&self) -> f64 {
        self.undetected as f64 / self.trials as f64
    }
}

/// Flips every bit of 32-octet output frames independently with probability
/// `ber` and returns the fraction of trials in which a corrupted frame was
/// accepted.
pub fn estimate_undetected_rate(ber: f64, trials: u64, rng_seed: u64) -> Result<f64, PduError> {
    run_residual_trials(ber, trials, rng_seed, Verification::Full).map(|e| e.rate())
}

pub fn run_residual_trials(
    ber: f64,
    trials: u64,
    rng_seed: u64,
    verification: Verification,
) -> Result<ResidualEstimate, PduError> {
    if !(0.0..=0.5).contains(&ber) {
        return Err(PduError::InvalidParameter(format!(
            "bit error rate {ber} outside [0, 0.5]"
        )));
    }
    if trials < MIN_TRIALS {
        return Err(PduError::InvalidParameter(format!(
            "{trials} trials, at least {MIN_TRIALS} required"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let codec = Codec::new().verification(verification);
    let key = SessionKey::random(&mut rng);
    let identity = PairingIdentity::new(1, 3)?;

    let mut pool = Vec::with_capacity(FRAME_POOL);
    for _ in 0..FRAME_POOL {
        let payload: [u8; 22] = rng.random();
        let mcnt = rng.random_range(1..4096u16);
        let ctl = ControlMCnt::new(ControlBits::DATA, mcnt)?;
        let frame = codec.encode_output(&payload, ctl, identity, &key)?;
        pool.push((frame, CounterWindow::after(mcnt - 1, 16)));
    }

    let skip = if ber > 0.0 && ber < 0.5 {
        Some(Geometric::new(ber).expect("ber checked"))
    } else {
        None
    };

    let mut estimate = ResidualEstimate {
        trials,
        corrupted: 0,
        undetected: 0,
    };
    let mut received = Vec::with_capacity(32);
    for trial in 0..trials {
        let (sent, window) = &pool[trial as usize % FRAME_POOL];
        received.clear();
        received.extend_from_slice(sent);
        if ber == 0.5 {
            // Independent fair flips on every bit: xor with a uniform mask.
            for byte in received.iter_mut() {
                *byte ^= rng.random::<u8>();
            }
        } else if let Some(skip) = &skip {
            let bits = received.len() as u64 * 8;
            let mut bit = skip.sample(&mut rng);
            while bit < bits {
                received[(bit / 8) as usize] ^= 0x80 >> (bit % 8);
                bit += 1 + skip.sample(&mut rng);
            }
        }
        if received == *sent {
            continue;
        }
        estimate.corrupted += 1;
        if codec
            .decode_output(&received, &key, identity, *window)
            .is_ok()
        {
            estimate.undetected += 1;
        }
    }
    Ok(estimate)
}
