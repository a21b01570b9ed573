//! Scalar abstraction so the numeric core runs in either f32 or f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, Signed};

/// Floating-point scalar for all tensor and signal math.
///
/// `Signed` is included so the rustfft blanket impl of `FftNum` applies to
/// any `Real` without a separate bound at FFT call sites.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Signed
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64, for constants and seeded f64 sampling.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    /// Lossy conversion to f64, for metadata-level math (frequencies, bpm).
    fn to_f64_c(self) -> f64;
}

impl Real for f32 {
    fn to_f64_c(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_c(self) -> f64 {
        self
    }
}
