//! Standard normal CDF, its logarithm, and the inverse Mills ratio.

use alloc::format;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

/// `ln(sqrt(2*pi))`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Below this argument the left tail is evaluated through its asymptotic
/// expansion; `erfc` is still accurate here, the switch only keeps the
/// logarithm away from subnormal territory.
const LEFT_TAIL: f64 = -30.0;

/// `Phi(x)` for the standard normal distribution.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("normal CDF of non-finite argument {x}")));
    }
    Ok(normal_cdf(x))
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Phi(x)`, finite for every finite `x`.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        libm::log1p(-0.5 * libm::erfc(x * FRAC_1_SQRT_2))
    } else if x > LEFT_TAIL {
        libm::log(normal_cdf(x))
    } else {
        let t = -x;
        -0.5 * t * t - libm::log(t) - LN_SQRT_2PI + libm::log(tail_series(t))
    }
}

/// `1 - 1/t^2 + 3/t^4 - 15/t^6 + ...`, truncated where the terms are below
/// double precision for `t >= 30`.
fn tail_series(t: f64) -> f64 {
    let inv2 = 1.0 / (t * t);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * inv2;
        sum += term;
    }
    sum
}

/// Inverse Mills ratio `exp(-x^2/2) / (sqrt(2 pi) Phi(x))` evaluated
/// literally.
///
/// Numerator and denominator both underflow for large negative `x`; once
/// that happens the quotient has no significant digits left and the call
/// fails with [`Error::Instability`]. [`mills_ratio`] is the stable
/// evaluation of the same function.
pub fn inv_mills(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("inverse Mills ratio of {x}")));
    }
    let num = libm::exp(-0.5 * x * x);
    let den = libm::sqrt(2.0 * PI) * normal_cdf(x);
    // a subnormal denominator has already lost relative precision
    if den < f64::MIN_POSITIVE || num < f64::MIN_POSITIVE && x < 0.0 {
        return Err(Error::Instability(format!(
            "exp(-x^2/2)/Phi(x) underflows at x = {x}"
        )));
    }
    let value = num / den;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Instability(format!("inverse Mills ratio overflows at x = {x}")))
    }
}

/// Inverse Mills ratio, stable over the whole real line.
///
/// Matches [`inv_mills`] wherever the literal form is representable and
/// follows the asymptote `-x` (with its correction series) in the far left
/// tail.
#[inline]
pub fn mills_ratio(x: f64) -> f64 {
    if x > LEFT_TAIL {
        let num = libm::exp(-0.5 * x * x);
        num / (libm::sqrt(2.0 * PI) * normal_cdf(x))
    } else {
        let t = -x;
        t / tail_series(t)
    }
}
