//! Simulated time in integer femtoseconds.
//!
//! Integer ticks keep simultaneous completions exactly simultaneous (the
//! worked big.LITTLE scenario depends on ties at t1), while still resolving
//! sub-nanosecond slice durations.

use serde::{Deserialize, Serialize};

pub const TICKS_PER_SECOND: f64 = 1e15;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash, Serialize, Deserialize,
)]
pub struct Ticks(pub u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub fn from_seconds(s: f64) -> Ticks {
        debug_assert!(s >= 0.0 && s.is_finite());
        Ticks((s * TICKS_PER_SECOND).round() as u64)
    }

    pub fn as_seconds(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND
    }

    pub fn saturating_sub(self, other: Ticks) -> Ticks {
        Ticks(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure2_slice_times_are_exact() {
        let big = Ticks::from_seconds(0.4);
        let little = Ticks::from_seconds(1.0);
        assert_eq!(big.0, 400_000_000_000_000);
        assert_eq!(little.0, 1_000_000_000_000_000);
        // 25 big iterations tie exactly with 10 little iterations
        assert_eq!(Ticks(big.0 * 25), Ticks(little.0 * 10));
        assert_eq!(Ticks(big.0 * 40).as_seconds(), 16.0);
    }
}
