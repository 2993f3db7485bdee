//! Link-level models and solvers for the uplink of 1-bit quantized massive
//! MU-MIMO-OFDM systems.
//!
//! The crate is `no_std` (with `alloc`) so the detector and estimator kernels
//! can be reused as golden models next to hardware flows. Everything that
//! touches files, threads or the command line lives in `onebit-sim`.
//!
//! * [`numerics`]: normal CDF, inverse Mills ratio, unitary radix-2 DFT, box
//!   projection and fixed-point quantization.
//! * [`airlink`]: system configuration, constellations, channel draws, OFDM
//!   transmission and 1-bit quantization.
//! * [`detect`]: the box-relaxed 1-bit ML detector (1BOX), its objective and
//!   gradient, the fixed-point emulation of the same loop, and zero-forcing.
//! * [`chest`]: pilots, zero-forcing and normalized-gradient 1-bit ML channel
//!   estimation, time-domain denoising and gain re-normalization.
//! * [`trial`]: one paired Monte Carlo trial across all receiver chains.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod airlink;
pub mod chest;
pub mod detect;
mod error;
pub mod linalg;
pub mod numerics;
pub mod trial;

pub use error::Error;

pub use num_complex::Complex64;

/// Convenience alias used across the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;
