//! Counter-based random streams.
//!
//! Every random quantity in a Monte Carlo trial is drawn from a generator keyed
//! by `(seed, trial, purpose, index)`, so a trial's draws do not depend on
//! which worker ran it, on which other users were evaluated, or on how far the
//! network was truncated.

use rand_pcg::Pcg64Mcg;

pub(crate) type StreamRng = Pcg64Mcg;

pub(crate) const LINES: u64 = 1;
pub(crate) const LINE_NODES_UP: u64 = 2;
pub(crate) const LINE_NODES_DOWN: u64 = 3;
pub(crate) const TYPICAL_LEFT: u64 = 4;
pub(crate) const TYPICAL_RIGHT: u64 = 5;
pub(crate) const NOMA_PLACEMENT: u64 = 6;
pub(crate) const SERVING_FADING: u64 = 7;
pub(crate) const SNAPSHOT_USERS: u64 = 8;
// Fading toward user k on a node group: FADING_BASE + 8 * k + group.
pub(crate) const FADING_BASE: u64 = 16;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TrialKey {
    base: u64,
}

impl TrialKey {
    pub(crate) fn new(seed: u64, trial: u64) -> Self {
        Self {
            base: splitmix(splitmix(seed) ^ trial.wrapping_mul(0xd6e8_feb8_6659_fd93)),
        }
    }

    pub(crate) fn rng(self, purpose: u64, index: u64) -> StreamRng {
        let a = splitmix(self.base ^ splitmix(purpose.wrapping_mul(0xa076_1d64_78bd_642f) ^ index));
        let b = splitmix(a ^ 0xe703_7ed1_a0b4_28db);
        Pcg64Mcg::new(((a as u128) << 64) | b as u128)
    }

    pub(crate) fn fading_rng(self, user: usize, group: u64, index: u64) -> StreamRng {
        self.rng(FADING_BASE + 8 * user as u64 + group, index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn distinct_keys_give_distinct_streams() {
        let k = TrialKey::new(7, 0);
        let a: u64 = k.rng(LINES, 0).random();
        let b: u64 = k.rng(LINES, 1).random();
        let c: u64 = TrialKey::new(7, 1).rng(LINES, 0).random();
        let d: u64 = TrialKey::new(8, 0).rng(LINES, 0).random();
        assert!(a != b && a != c && a != d && b != c);
        let again: u64 = TrialKey::new(7, 0).rng(LINES, 0).random();
        assert_eq!(a, again);
    }
}
