//! Scalar math shim: std intrinsics when available, `libm` otherwise, so the
//! crate builds without `std` and numeric code reads the same either way.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        x.ceil()
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline]
    pub fn hypot_many(xs: &[f64]) -> f64 {
        sqrt(xs.iter().map(|v| v * v).sum())
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline]
    pub fn hypot_many(xs: &[f64]) -> f64 {
        sqrt(xs.iter().map(|v| v * v).sum())
    }
}

pub use imp::*;

/// Exact `2^-n` for `n <= 1022`, built from the IEEE-754 exponent bits so it
/// needs no float math support.
#[inline]
pub fn exp2_neg(n: u32) -> f64 {
    debug_assert!(n <= 1022);
    f64::from_bits(((1023 - n) as u64) << 52)
}
