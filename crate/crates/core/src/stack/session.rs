use crate::pdu::SessionKey;
use crate::sim::{Micros, SimTime};

use super::{ProtocolError, TimingProfile};

/// One established master/device association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub key: SessionKey,
    pub established_at: SimTime,
    pub safety_armed: bool,
}

impl Session {
    pub fn new(key: SessionKey, established_at: SimTime) -> Self {
        Self {
            key,
            established_at,
            safety_armed: false,
        }
    }
}

/// Runs the safety parameter exchange over process-data cycles.
///
/// `lost(cycle)` reports whether the frame of the 1-based `cycle` is lost; a
/// lost parameter frame is repeated in the next cycle. Returns the elapsed
/// time, or `ConnectionLost` once `loss_threshold` consecutive cycles fail.
pub fn safety_connection_establish(
    session: &mut Session,
    profile: &TimingProfile,
    safety: bool,
    mut lost: impl FnMut(u32) -> bool,
) -> Result<Micros, ProtocolError> {
    if !safety {
        return Ok(0);
    }
    let (mut delivered, mut consecutive, mut cycle) = (0, 0, 0);
    while delivered < profile.safety_param_cycles {
        cycle += 1;
        if lost(cycle) {
            consecutive += 1;
            if consecutive >= profile.loss_threshold {
                return Err(ProtocolError::ConnectionLost);
            }
        } else {
            consecutive = 0;
            delivered += 1;
        }
    }
    session.safety_armed = true;
    Ok(u64::from(cycle) * profile.w_cycle_us)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::new(SessionKey::new([9; 16]), SimTime::ZERO)
    }

    #[test]
    fn lossless_exchange_takes_five_cycles() {
        let mut s = session();
        let t = safety_connection_establish(&mut s, &TimingProfile::default(), true, |_| false);
        assert_eq!(t.unwrap(), 25_000);
        assert!(s.safety_armed);
    }

    #[test]
    fn one_loss_adds_a_cycle() {
        let mut s = session();
        let t = safety_connection_establish(&mut s, &TimingProfile::default(), true, |c| c == 2);
        assert_eq!(t.unwrap(), 30_000);
    }

    #[test]
    fn non_safety_mode_skips() {
        let mut s = session();
        let t = safety_connection_establish(&mut s, &TimingProfile::default(), false, |_| true);
        assert_eq!(t.unwrap(), 0);
        assert!(!s.safety_armed);
    }

    #[test]
    fn aborts_after_loss_threshold() {
        let mut s = session();
        let t = safety_connection_establish(&mut s, &TimingProfile::default(), true, |c| c >= 3);
        assert_eq!(t, Err(ProtocolError::ConnectionLost));
        assert!(!s.safety_armed);
    }
}
