//! Clamped inverse Mills ratio lookup and the complex-valued variants.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::fixed::FixedPointFormat;
use super::special::{inv_mills, mills_ratio};
use crate::{Error, Result};

/// Number of entries in the hardware lookup table.
pub const MILLS_TABLE_LEN: usize = 128;

/// Sampled inverse Mills ratio between two thresholds.
///
/// Outside `(t_n, t_p)` the function is replaced by its asymptotes: zero
/// above `t_p` and `-x` below `t_n`. Inside, entry `i` holds `omega(t_n + i *
/// delta)` with `delta = (t_p - t_n) / 128`, rounded to `value_format`, and a
/// lookup returns the entry nearest to the argument. With the default
/// thresholds `delta` is `1/16`, so every argument on a four-fractional-bit
/// grid addresses an entry exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedMillsTable {
    t_n: f64,
    t_p: f64,
    entries: Vec<f64>,
    value_format: FixedPointFormat,
}

impl ClampedMillsTable {
    pub fn new(t_n: f64, t_p: f64, value_format: FixedPointFormat) -> Result<Self> {
        if !(t_n < 0.0 && 0.0 < t_p) || !t_n.is_finite() || !t_p.is_finite() {
            return Err(Error::Config(format!(
                "thresholds must satisfy t_n < 0 < t_p, got ({t_n}, {t_p})"
            )));
        }
        let delta = (t_p - t_n) / MILLS_TABLE_LEN as f64;
        let entries = (0..MILLS_TABLE_LEN)
            .map(|i| value_format.quantize(mills_ratio(t_n + i as f64 * delta)))
            .collect();
        Ok(Self {
            t_n,
            t_p,
            entries,
            value_format,
        })
    }

    /// Thresholds `t_n = -4`, `t_p = 4` and `[3.4]` entries.
    pub fn hardware() -> Self {
        Self::new(-4.0, 4.0, FixedPointFormat::q(3, 4)).expect("valid default table")
    }

    pub fn t_n(&self) -> f64 {
        self.t_n
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn value_format(&self) -> FixedPointFormat {
        self.value_format
    }

    /// Spacing between table samples.
    pub fn spacing(&self) -> f64 {
        (self.t_p - self.t_n) / MILLS_TABLE_LEN as f64
    }

    /// Sample abscissa of entry `i`.
    pub fn sample_point(&self, i: usize) -> f64 {
        self.t_n + i as f64 * self.spacing()
    }

    /// Entry addressed by an interior argument.
    pub fn index_of(&self, x: f64) -> usize {
        let pos = (x - self.t_n) / self.spacing();
        let i = libm::floor(pos + 0.5);
        (i.max(0.0) as usize).min(MILLS_TABLE_LEN - 1)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.t_p {
            0.0
        } else if x <= self.t_n {
            -x
        } else {
            self.entries[self.index_of(x)]
        }
    }
}

/// Piecewise inverse Mills ratio: `0` above `t_p`, `-x` below `t_n`, the
/// tabulated value in between.
pub fn inv_mills_clamped(x: f64, table: &ClampedMillsTable) -> f64 {
    table.eval(x)
}

/// Which evaluation of the inverse Mills ratio a solver uses.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MillsRatio {
    /// Full-precision evaluation, stable in the far left tail.
    #[default]
    Exact,
    /// Thresholded lookup table.
    Clamped(ClampedMillsTable),
}

impl MillsRatio {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MillsRatio::Exact => mills_ratio(x),
            MillsRatio::Clamped(t) => t.eval(x),
        }
    }

    #[inline]
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.eval(z.re), self.eval(z.im))
    }
}

/// `omega(Re z) + j omega(Im z)` with the literal evaluation of
/// [`inv_mills`]; fails where that evaluation is unstable.
pub fn inv_mills_complex(z: Complex64) -> Result<Complex64> {
    Ok(Complex64::new(inv_mills(z.re)?, inv_mills(z.im)?))
}

/// Complex variant built on any [`MillsRatio`] evaluation.
pub fn inv_mills_complex_with(z: Complex64, mills: &MillsRatio) -> Complex64 {
    mills.eval_complex(z)
}
