//! Scalar special functions, transforms, projections and fixed-point
//! primitives shared by the link model and the solvers.

mod dft;
mod fixed;
mod fixed_dft;
mod mills;
mod special;

pub use dft::{unitary_dft, DftPlan};
pub use fixed::{quantize_fixed, FixedPointFormat};
pub use fixed_dft::{FixedDft, TWIDDLE_FORMAT};
pub use mills::{
    inv_mills_clamped, inv_mills_complex, inv_mills_complex_with, ClampedMillsTable, MillsRatio,
    MILLS_TABLE_LEN,
};
pub use special::{inv_mills, log_normal_cdf, mills_ratio, std_normal_cdf};


use num_complex::Complex64;

/// `sign(t) * min(|t|, half_width)`
#[inline]
pub fn clip(t: f64, half_width: f64) -> f64 {
    t.clamp(-half_width, half_width)
}

/// Projection onto the box `max(|Re x|, |Im x|) <= half_width`, applied to
/// the real and imaginary parts independently.
#[inline]
pub fn box_project(x: Complex64, half_width: f64) -> Complex64 {
    Complex64::new(clip(x.re, half_width), clip(x.im, half_width))
}
