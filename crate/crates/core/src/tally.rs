//! Value types carried through the memoized recursions.
//!
//! A recursion branch contributes its child's value, possibly shifted by a
//! power of `q` (the inversion marker). Plain counters ignore the shift;
//! [`QPoly`] applies it.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Non-negative integer coefficient. `u128` is the fixed-width fast path and
/// reports overflow; `BigUint` never overflows.
pub trait Coefficient: Clone + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign_checked(&mut self, other: &Self) -> Result<()>;
    fn to_biguint(&self) -> BigUint;
    fn heap_bytes(&self) -> usize;
}

impl Coefficient for u128 {
    fn zero() -> Self {
        0
    }

    fn one() -> Self {
        1
    }

    fn is_zero(&self) -> bool {
        *self == 0
    }

    #[inline]
    fn add_assign_checked(&mut self, other: &Self) -> Result<()> {
        *self = self.checked_add(*other).ok_or(Error::Overflow)?;
        Ok(())
    }

    fn to_biguint(&self) -> BigUint {
        BigUint::from(*self)
    }

    fn heap_bytes(&self) -> usize {
        0
    }
}

impl Coefficient for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn add_assign_checked(&mut self, other: &Self) -> Result<()> {
        *self += other;
        Ok(())
    }

    fn to_biguint(&self) -> BigUint {
        self.clone()
    }

    fn heap_bytes(&self) -> usize {
        (self.bits() as usize).div_ceil(64) * 8
    }
}

/// What a memoized recursion stores per state.
pub trait Tally: Clone + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    /// `self += q^shift * other`, dropping powers of `q` above `degree_cap`.
    fn add_shifted(&mut self, other: &Self, shift: usize, degree_cap: Option<usize>) -> Result<()>;
    fn heap_bytes(&self) -> usize;
}

impl<C: Coefficient> Tally for C {
    fn zero() -> Self {
        C::zero()
    }

    fn one() -> Self {
        C::one()
    }

    fn is_zero(&self) -> bool {
        Coefficient::is_zero(self)
    }

    #[inline]
    fn add_shifted(&mut self, other: &Self, _shift: usize, _cap: Option<usize>) -> Result<()> {
        self.add_assign_checked(other)
    }

    fn heap_bytes(&self) -> usize {
        Coefficient::heap_bytes(self)
    }
}

/// Dense polynomial in `q` with non-negative coefficients; index = degree.
/// May carry trailing zeros after a capped addition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QPoly<C> {
    coeffs: Vec<C>,
}

impl<C: Coefficient> QPoly<C> {
    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Highest power with a nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn into_coeffs(self) -> Vec<C> {
        self.coeffs
    }
}

impl<C: Coefficient> Tally for QPoly<C> {
    fn zero() -> Self {
        QPoly { coeffs: Vec::new() }
    }

    fn one() -> Self {
        QPoly {
            coeffs: vec![C::one()],
        }
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add_shifted(&mut self, other: &Self, shift: usize, degree_cap: Option<usize>) -> Result<()> {
        let mut top = other.coeffs.len() + shift;
        if let Some(cap) = degree_cap {
            top = top.min(cap + 1);
        }
        if top <= shift {
            return Ok(());
        }
        if self.coeffs.len() < top {
            self.coeffs.resize(top, C::zero());
        }
        for (dst, src) in self.coeffs[shift..top].iter_mut().zip(&other.coeffs) {
            dst.add_assign_checked(src)?;
        }
        Ok(())
    }

    fn heap_bytes(&self) -> usize {
        self.coeffs.capacity() * std::mem::size_of::<C>()
            + self
                .coeffs
                .iter()
                .map(Coefficient::heap_bytes)
                .sum::<usize>()
    }
}

/// Converts a fixed-width result to `u64` where it fits, for compact test
/// comparisons.
pub fn to_u64<C: Coefficient>(c: &C) -> Option<u64> {
    c.to_biguint().to_u64()
}
