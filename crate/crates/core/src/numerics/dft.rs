//! Unitary radix-2 DFT.
//!
//! `F[k, n] = exp(-j 2 pi k n / W) / sqrt(W)`, so `F F^H = I`. The forward
//! transform applies `F`, the inverse applies `F^H`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Precomputed twiddles and bit-reversal permutation for one length.
#[derive(Debug, Clone)]
pub struct DftPlan {
    len: usize,
    log2_len: u32,
    /// `exp(-j 2 pi k / W)` for `k < W/2`
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
    norm: f64,
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Config(format!(
                "DFT length {len} is not a power of two"
            )));
        }
        let log2_len = len.trailing_zeros();
        let twiddles = (0..len / 2)
            .map(|k| {
                let (s, c) = libm::sincos(-2.0 * PI * k as f64 / len as f64);
                Complex64::new(c, s)
            })
            .collect();
        let bitrev = (0..len as u32)
            .map(|i| {
                if log2_len == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - log2_len)
                }
            })
            .collect();
        Ok(Self {
            len,
            log2_len,
            twiddles,
            bitrev,
            norm: 1.0 / libm::sqrt(len as f64),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn log2_len(&self) -> u32 {
        self.log2_len
    }

    /// `v <- F v`
    pub fn forward(&self, v: &mut [Complex64]) {
        self.unscaled(v, false);
        for x in v.iter_mut() {
            *x *= self.norm;
        }
    }

    /// `v <- F^H v`
    pub fn inverse(&self, v: &mut [Complex64]) {
        self.unscaled(v, true);
        for x in v.iter_mut() {
            *x *= self.norm;
        }
    }

    /// Twiddle for stage butterfly `k` of a span-`half` stage.
    #[inline]
    pub(crate) fn twiddle(&self, k: usize, half: usize, inverse: bool) -> Complex64 {
        let t = self.twiddles[k * (self.len / (2 * half))];
        if inverse {
            t.conj()
        } else {
            t
        }
    }

    pub(crate) fn permute(&self, v: &mut [Complex64]) {
        for i in 0..self.len {
            let j = self.bitrev[i] as usize;
            if j > i {
                v.swap(i, j);
            }
        }
    }

    /// `sum_n v[n] exp(-+ j 2 pi k n / W)` without normalization.
    fn unscaled(&self, v: &mut [Complex64], inverse: bool) {
        assert_eq!(v.len(), self.len, "buffer length must match the plan");
        self.permute(v);
        let mut half = 1;
        while half < self.len {
            let stride = self.len / (2 * half);
            for start in (0..self.len).step_by(2 * half) {
                for k in 0..half {
                    let mut t = self.twiddles[k * stride];
                    if inverse {
                        t = t.conj();
                    }
                    let a = v[start + k];
                    let b = v[start + k + half] * t;
                    v[start + k] = a + b;
                    v[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// `F v` (or `F^H v` when `inverse` is set) for a power-of-two length.
pub fn unitary_dft(v: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(v.len())?;
    let mut out = v.to_vec();
    if inverse {
        plan.inverse(&mut out);
    } else {
        plan.forward(&mut out);
    }
    Ok(out)
}
