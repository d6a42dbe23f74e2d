//! Scalar fields the tensor operations are instantiated over.
//!
//! Training runs on `f64`; verification runs on [`Rational`], an arbitrary
//! precision fraction type that never rounds.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs_val(&self) -> Self;
    fn is_finite_val(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Exact rational value of a finite float (every finite f64 is a dyadic rational).
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    Rational::from_f64(v)
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}
