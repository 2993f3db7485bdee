//! Block-scaled radix-2 transform emulating a streaming fixed-point FFT core.
//!
//! Each butterfly stage works on data held at a fixed number of fractional
//! bits. The last `shifts` stages divide their outputs by two, so the
//! transform computes `2^-shifts * sum_n v[n] exp(-+j 2 pi k n / W)`. Stage
//! outputs are rounded to nearest (ties to even); word growth is not
//! saturated here, callers quantize at the signal boundary.

use alloc::format;

use num_complex::Complex64;

use super::dft::DftPlan;
use super::fixed::FixedPointFormat;
use crate::{Error, Result};

/// 16-bit twiddle factors.
pub const TWIDDLE_FORMAT: FixedPointFormat = FixedPointFormat::q(2, 14);

#[derive(Debug, Clone)]
pub struct FixedDft {
    plan: DftPlan,
    twiddles: alloc::vec::Vec<Complex64>,
}

impl FixedDft {
    pub fn new(len: usize) -> Result<Self> {
        let plan = DftPlan::new(len)?;
        let twiddles = (0..len / 2)
            .map(|k| TWIDDLE_FORMAT.quantize_complex(plan.twiddle(k, len / 2, false)))
            .collect();
        Ok(Self { plan, twiddles })
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    pub fn stages(&self) -> u32 {
        self.plan.log2_len()
    }

    /// Shift counts `(forward, inverse)` that turn the raw sums into
    /// `F / sqrt(2)` and `sqrt(2) F^H`.
    ///
    /// Both are powers of two only for `W = 2^n` with odd `n`.
    pub fn sqrt2_schedule(&self) -> Result<(u32, u32)> {
        let n = self.stages();
        if n % 2 == 0 {
            return Err(Error::Config(format!(
                "a {}-point transform cannot absorb sqrt(2) into power-of-two stage scaling",
                self.len()
            )));
        }
        Ok(((n + 1) / 2, (n - 1) / 2))
    }

    pub fn transform(&self, v: &mut [Complex64], inverse: bool, shifts: u32, data_frac_bits: u32) {
        let len = self.len();
        assert_eq!(v.len(), len, "buffer length must match the plan");
        let s = libm::ldexp(1.0, data_frac_bits as i32);
        let round = |z: Complex64| Complex64::new(libm::rint(z.re * s) / s, libm::rint(z.im * s) / s);
        self.plan.permute(v);
        let stages = self.stages();
        let mut half = 1;
        let mut stage = 0;
        while half < len {
            let stride = len / (2 * half);
            let scale = if stage + shifts >= stages { 0.5 } else { 1.0 };
            for start in (0..len).step_by(2 * half) {
                for k in 0..half {
                    let mut t = self.twiddles[k * stride];
                    if inverse {
                        t = t.conj();
                    }
                    let a = v[start + k];
                    let b = v[start + k + half] * t;
                    v[start + k] = round((a + b) * scale);
                    v[start + k + half] = round((a - b) * scale);
                }
            }
            half *= 2;
            stage += 1;
        }
    }
}
