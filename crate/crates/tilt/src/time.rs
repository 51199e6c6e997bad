//! Event time and grid arithmetic.
//!
//! Time is a signed 64-bit tick count. Every definition lives on a *grid*:
//! the multiples of its precision `p`. A value anchored at grid point `g`
//! describes the half-open interval `(g - p, g]` — time ranges throughout
//! the engine are half-open on the left and closed on the right, so
//! adjacent intervals tile without overlap.

use std::fmt;

/// A point in event time, measured in integer ticks.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Time(pub i64);

impl Time {
    /// Largest multiple of `p` that is `<= self`.
    pub fn floor_to(self, p: i64) -> Time {
        debug_assert!(p >= 1);
        Time(self.0.div_euclid(p) * p)
    }

    /// Smallest multiple of `p` that is `>= self`.
    pub fn ceil_to(self, p: i64) -> Time {
        debug_assert!(p >= 1);
        let f = self.floor_to(p);
        if f == self {
            self
        } else {
            Time(f.0 + p)
        }
    }

    /// Smallest multiple of `p` that is strictly greater than `self`.
    pub fn next_on(self, p: i64) -> Time {
        debug_assert!(p >= 1);
        Time(self.floor_to(p).0 + p)
    }

    /// True when `self` sits on the grid of multiples of `p`.
    pub fn on_grid(self, p: i64) -> bool {
        debug_assert!(p >= 1);
        self.0.rem_euclid(p) == 0
    }

    /// Shift by a signed tick offset.
    pub fn offset(self, d: i64) -> Time {
        Time(self.0 + d)
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Least common multiple of two positive precisions.
pub fn lcm(a: i64, b: i64) -> i64 {
    assert!(a >= 1 && b >= 1);
    a / gcd(a, b) * b
}

/// Greatest common divisor of two positive integers.
pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
