//! Fibonacci index arithmetic.
//!
//! The alphabet lives on the sequence with initial values F₁ = 1 and F₂ = 2,
//! so every index m ≥ 1 maps to a distinct value and the index ↔ value map is
//! a bijection. States are indexed by m throughout the crate; the physical
//! OAM value is recovered with [`fib`].

use crate::Error;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Index into the Fibonacci sequence, m ≥ 1.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FibIndex(u32);

impl FibIndex {
    /// Largest index whose value fits in a `u64` under this convention.
    pub const MAX: u32 = 91;

    pub fn new(m: u32) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::Domain("Fibonacci index must be >= 1".into()));
        }
        if m > Self::MAX {
            return Err(Error::Domain(format!(
                "Fibonacci index {m} exceeds supported maximum {}",
                Self::MAX
            )));
        }
        Ok(FibIndex(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Debug for FibIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

impl fmt::Display for FibIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// F_m with F₁ = 1, F₂ = 2, F_{m+2} = F_{m+1} + F_m.
pub fn fib(m: FibIndex) -> u64 {
    let (mut lo, mut hi) = (1u64, 2u64);
    match m.get() {
        1 => 1,
        2 => 2,
        k => {
            for _ in 2..k {
                let next = lo + hi;
                lo = hi;
                hi = next;
            }
            hi
        }
    }
}

/// Convenience for raw indices; errors on m = 0.
pub fn fib_value(m: u32) -> Result<u64, Error> {
    Ok(fib(FibIndex::new(m)?))
}
