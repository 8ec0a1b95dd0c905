//! Scalar abstraction for the numeric core.
//!
//! Measure masses, Dirichlet energies and slope fits are generic over the
//! floating-point type; group coordinates stay integral and weight arithmetic
//! stays exact rational. Concrete `f64` aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

/// Floating-point scalar: f32 or f64.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + AddAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 -> Scalar")
    }
    fn of_usize(v: usize) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("usize -> Scalar")
    }
    fn of_i64(v: i64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("i64 -> Scalar")
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Scalar -> f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
