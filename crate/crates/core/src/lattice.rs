//! Subsets of the server set `{0, .., k-1}` encoded as bitmasks.
//!
//! Server `i` (0-based) is bit `i`. The co-lex order on subsets (compare by
//! the largest element in the symmetric difference) is exactly unsigned
//! comparison of the masks, so iterating `0..1 << k` visits every subset
//! after all of its co-lex predecessors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension any lattice table in this crate accepts.
pub const MAX_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsetMask {
    bits: u32,
    k: u8,
}

impl SubsetMask {
    pub fn new(bits: u32, k: usize) -> Result<Self> {
        check_k(k)?;
        if u64::from(bits) >= 1u64 << k {
            return Err(Error::Invalid(format!("mask {bits:#b} has bits outside [0, {k})")));
        }
        Ok(Self { bits, k: k as u8 })
    }

    pub fn empty(k: usize) -> Result<Self> {
        Self::new(0, k)
    }

    pub fn full(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(Self { bits: full_mask(k), k: k as u8 })
    }

    /// Builds a mask from 0-based element indices.
    pub fn from_elements(elements: &[usize], k: usize) -> Result<Self> {
        check_k(k)?;
        let mut bits = 0u32;
        for &e in elements {
            if e >= k {
                return Err(Error::Invalid(format!("element {e} outside [0, {k})")));
            }
            bits |= 1 << e;
        }
        Ok(Self { bits, k: k as u8 })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn k(self) -> usize {
        self.k as usize
    }

    pub fn contains(self, i: usize) -> bool {
        i < self.k() && self.bits & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn with(self, i: usize) -> Self {
        debug_assert!(i < self.k());
        Self { bits: self.bits | (1 << i), ..self }
    }

    pub fn without(self, i: usize) -> Self {
        Self { bits: self.bits & !(1 << i), ..self }
    }

    pub fn largest(self) -> Option<usize> {
        largest(self.bits)
    }

    /// Smallest element not in the set, `None` for the full set.
    pub fn smallest_missing(self) -> Option<usize> {
        let i = smallest_missing(self.bits);
        (i < self.k()).then_some(i)
    }

    pub fn elements(self) -> impl Iterator<Item = usize> {
        Elements(self.bits)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, e) in self.elements().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("}")
    }
}

/// Strict co-lex precedence: some `i` in `b \ a` with `a` and `b` agreeing
/// on every element above `i`.
pub fn colex_precedes(a: SubsetMask, b: SubsetMask) -> Result<bool> {
    if a.k != b.k {
        return Err(Error::DimensionMismatch { expected: a.k(), found: b.k() });
    }
    let diff = a.bits ^ b.bits;
    if diff == 0 {
        return Ok(false);
    }
    let top = 31 - diff.leading_zeros();
    Ok(b.bits & (1 << top) != 0)
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(Error::DimensionOutOfRange { k, max: MAX_K })
    }
}

#[inline]
pub(crate) fn full_mask(k: usize) -> u32 {
    ((1u64 << k) - 1) as u32
}

#[inline]
pub(crate) fn smallest_missing(bits: u32) -> usize {
    (!bits).trailing_zeros() as usize
}

#[inline]
pub(crate) fn largest(bits: u32) -> Option<usize> {
    (bits != 0).then(|| 31 - bits.leading_zeros() as usize)
}

/// Iterates the set bits of a raw mask, lowest first.
#[derive(Clone, Copy)]
pub(crate) struct Elements(pub(crate) u32);

impl Iterator for Elements {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(i as usize)
    }
}
