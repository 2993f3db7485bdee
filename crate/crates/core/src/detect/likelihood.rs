//! The 1-bit probit likelihood shared by data detection and channel
//! estimation.
//!
//! Both problems observe `r_k = Q(F^H (A_k ⊠ X) + n_k)` for a set of known
//! matrices `A_k` and an unknown `X`. For detection `A_k` runs over the
//! per-antenna channels and `X` is the symbol matrix; for estimation `A_k`
//! runs over the pilot frames and `X` is one antenna's channel.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::airlink::extended_dot_into;
use crate::linalg::CMat;
use crate::numerics::{log_normal_cdf, DftPlan, MillsRatio};

/// One observed antenna (or training symbol): the known matrix and its
/// 1-bit samples.
pub(crate) struct Term<'a> {
    pub a: &'a CMat,
    pub r: &'a [Complex64],
}

/// `-sum_k log p(r_k | F^H (A_k ⊠ X))`.
pub(crate) fn neg_log_likelihood(terms: &[Term<'_>], x: &CMat, sigma: f64, plan: &DftPlan) -> f64 {
    let c = SQRT_2 / sigma;
    let mut mu = vec![Complex64::new(0.0, 0.0); x.rows()];
    let mut total = 0.0;
    for t in terms {
        extended_dot_into(t.a, x, &mut mu);
        plan.inverse(&mut mu);
        for (m, r) in mu.iter().zip(t.r) {
            total -= log_normal_cdf(c * r.re * m.re) + log_normal_cdf(c * r.im * m.im);
        }
    }
    total
}

/// The matrix `G` with `G[w, u] = sum_k conj(A_k[w, u]) V_k[w]`, where
/// `V_k = F(r_k ⊙ omega_c(alpha_k))` and `alpha_k = (sqrt2 / sigma) r_k ⊙
/// F^H (A_k ⊠ X)`.
///
/// The negative Wirtinger gradient `-df/dconj(X)` equals
/// `sqrt2 / (2 sigma) * G`.
pub(crate) fn descent_direction(
    terms: &[Term<'_>],
    x: &CMat,
    sigma: f64,
    mills: &MillsRatio,
    plan: &DftPlan,
) -> CMat {
    let c = SQRT_2 / sigma;
    let mut g = CMat::zeros(x.rows(), x.cols());
    let mut buf = vec![Complex64::new(0.0, 0.0); x.rows()];
    for t in terms {
        extended_dot_into(t.a, x, &mut buf);
        plan.inverse(&mut buf);
        for (v, r) in buf.iter_mut().zip(t.r) {
            let alpha = Complex64::new(c * r.re * v.re, c * r.im * v.im);
            let w = mills.eval_complex(alpha);
            *v = Complex64::new(r.re * w.re, r.im * w.im);
        }
        plan.forward(&mut buf);
        accumulate_adjoint(&mut g, t.a, &buf);
    }
    g
}

/// `G[w, u] += conj(A[w, u]) v[w]`
#[inline]
pub(crate) fn accumulate_adjoint(g: &mut CMat, a: &CMat, v: &[Complex64]) {
    for (w, vw) in v.iter().enumerate() {
        for (gi, ai) in g.row_mut(w).iter_mut().zip(a.row(w)) {
            *gi += ai.conj() * vw;
        }
    }
}

/// Columns of a `W x N` matrix, each as a contiguous vector.
pub(crate) fn columns(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.cols()).map(|n| m.column(n)).collect()
}
