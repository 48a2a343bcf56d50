//! Scalar traits.
//!
//! [`Field`] is the minimum needed for the moment computations (ring ops,
//! division, ordering) and is implemented for `f32`, `f64` and the exact
//! rationals. [`Real`] adds the transcendental functions required by the
//! envelope solver, eigen-decompositions and criterion values.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::{Float, Num};

/// An ordered field.
pub trait Field:
    Num + Copy + Neg<Output = Self> + PartialOrd + Debug + Display + Send + Sync + 'static
{
    fn from_int(n: i64) -> Self;

    /// Lossy conversion used for diagnostics and JSON output.
    fn as_f64(self) -> f64;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

/// A floating point field.
pub trait Real: Field + Float + Sum {
    fn from_f64(x: f64) -> Self;
}

impl Field for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
}

impl Field for f32 {
    fn from_int(n: i64) -> Self {
        n as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
}

impl Field for Ratio<i64> {
    fn from_int(n: i64) -> Self {
        Ratio::from_integer(n)
    }
    fn as_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

impl Field for Ratio<i128> {
    fn from_int(n: i64) -> Self {
        Ratio::from_integer(n as i128)
    }
    fn as_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
