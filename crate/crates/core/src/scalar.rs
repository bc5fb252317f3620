//! Scalar abstraction for the numeric engine.
//!
//! Everything in [`crate::tensor`] and [`crate::nn`] is generic over this
//! trait so the same code runs at training precision (`f64`) and at
//! checkpoint precision (`f32`).

use std::fmt::{Debug, Display};

use num_traits::{Float, NumAssignOps};

pub trait Scalar:
    Float + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn from_usize(n: usize) -> Self;
}

macro_rules! impl_scalar {
    ($($t:ty)*) => {$(
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn from_usize(n: usize) -> Self {
                n as $t
            }
        }
    )*};
}

impl_scalar!(f32 f64);

/// Double-double scalar (~31 significant digits). The gradient checker
/// runs its finite-difference evaluations at this precision so the
/// numeric oracle is not limited by f64 loss quantization.
impl Scalar for twofloat::TwoFloat {
    #[inline]
    fn from_f64(v: f64) -> Self {
        twofloat::TwoFloat::from(v)
    }
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        twofloat::TwoFloat::from(n as f64)
    }
}
