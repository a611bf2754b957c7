//! Scalar math routed through `libm` so results are identical with or
//! without `std` and across platforms.

/// Largest utility or log-rate magnitude accepted before `exp`.
pub const EXPONENT_LIMIT: f64 = 700.0;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn signum(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `exp` that rejects exponents outside the accepted envelope.
#[inline]
pub fn checked_exp(x: f64) -> crate::Result<f64> {
    if !(abs(x) <= EXPONENT_LIMIT) {
        return Err(crate::Error::NumericOverflow { exponent: x });
    }
    Ok(exp(x))
}
