use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::airlink::{tap_to_subcarrier_kernel, SystemConfig};
use crate::linalg::{CMat, Cholesky};
use crate::{Error, Result};

/// Projection of used-band channel estimates onto the span of `L` taps.
///
/// With `A` the `W_used x L` restriction of the tap-to-subcarrier kernel to
/// the used rows, the operator is `A (A^H A)^-1 A^H`. The kernel differs
/// from the first `L` DFT columns only by a sign per column, so both span
/// the same subspace.
#[derive(Debug, Clone)]
pub struct Tdmle {
    basis: CMat,
    gram: Cholesky,
}

impl Tdmle {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let (l, used) = (cfg.taps, cfg.used_subcarriers);
        if l == 0 || l > used {
            return Err(Error::Config(format!("L = {l} taps must lie in 1..={used}")));
        }
        let kernel = tap_to_subcarrier_kernel(cfg.subcarriers, l);
        let lo = cfg.first_used();
        let basis = CMat::from_fn(used, l, |i, t| kernel[(lo + i, t)]);
        let gram = Cholesky::new(&basis.gram())?;
        Ok(Self { basis, gram })
    }

    /// Length of the vectors the operator acts on.
    pub fn len(&self) -> usize {
        self.basis.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.rows() == 0
    }

    pub fn apply(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        if h.len() != self.len() {
            return Err(Error::Dimension(format!(
                "TDMLE acts on {} used subcarriers, got {}",
                self.len(),
                h.len()
            )));
        }
        let mut coef = self.basis.adjoint_mul_vec(h);
        self.gram.solve_in_place(&mut coef);
        Ok((0..self.len())
            .map(|i| {
                self.basis
                    .row(i)
                    .iter()
                    .zip(&coef)
                    .map(|(a, c)| a * c)
                    .sum()
            })
            .collect())
    }

    /// The `W_used x W_used` operator, built column by column.
    pub fn matrix(&self) -> CMat {
        let n = self.len();
        let mut m = CMat::zeros(n, n);
        let mut e = alloc::vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.fill(Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e).expect("length matches");
            m.set_column(j, &col);
        }
        m
    }

    /// Denoises every user column of a `W x U` per-antenna estimate in
    /// place; guard rows are left untouched.
    pub fn denoise_antenna(&self, h: &mut CMat, cfg: &SystemConfig) -> Result<()> {
        let used = cfg.used_set();
        for u in 0..h.cols() {
            let col: Vec<Complex64> = used.clone().map(|w| h[(w, u)]).collect();
            let out = self.apply(&col)?;
            for (w, x) in used.clone().zip(out) {
                h[(w, u)] = x;
            }
        }
        Ok(())
    }
}

/// One-shot form of [`Tdmle::apply`] for a single length-`W_used` vector.
pub fn tdmle_denoise(h_est: &[Complex64], cfg: &SystemConfig) -> Result<Vec<Complex64>> {
    Tdmle::new(cfg)?.apply(h_est)
}
