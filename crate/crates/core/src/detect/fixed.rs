//! Bit-accurate emulation of the 1BOX loop at hardware word lengths.
//!
//! Signals are rounded to their formats where they cross a module boundary:
//! the channel `H`, the matched products `z_b`, the scaled samples `alpha_b`,
//! the transformed residuals `V`, the stored update `kappa G` and the iterate
//! `S`. The transforms run on [`FixedDft`] with stage shifts chosen so the
//! inverse computes `sqrt2 F^H` and the forward `F / sqrt2`; the first factor
//! replaces the `sqrt2` of `alpha = sqrt2/sigma r ⊙ F^H z`, the second is
//! compensated by the doubled step `kappa = 1/32`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::likelihood::accumulate_adjoint;
use super::{finish, DetectionResult, DetectorParams};
use crate::airlink::{extended_dot_into, FreqChannel, ReceivedBits, SystemConfig};
use crate::linalg::CMat;
use crate::numerics::{box_project, ClampedMillsTable, FixedDft, FixedPointFormat};
use crate::{Error, Result};

/// Signal names accepted by [`FixedPointPlan::format`].
pub const SIGNAL_NAMES: [&str; 7] = ["H", "z", "alpha", "V", "G", "S", "inv_sigma"];

/// Word formats of the fixed-point loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointPlan {
    pub h: FixedPointFormat,
    pub z: FixedPointFormat,
    pub alpha: FixedPointFormat,
    pub v: FixedPointFormat,
    /// Format of the stored update `kappa G`.
    pub g: FixedPointFormat,
    pub s: FixedPointFormat,
    pub inv_sigma: FixedPointFormat,
    /// Lookup table for `omega`; its value format is that of the table
    /// output.
    pub table: ClampedMillsTable,
}

impl FixedPointPlan {
    pub fn hardware() -> Self {
        let q = FixedPointFormat::q;
        Self {
            h: q(4, 4),
            z: q(5, 5),
            alpha: q(5, 4),
            v: q(4, 4),
            g: q(1, 7),
            s: q(2, 7),
            inv_sigma: q(2, 6),
            table: ClampedMillsTable::hardware(),
        }
    }

    pub fn format(&self, name: &str) -> Option<FixedPointFormat> {
        Some(match name {
            "H" => self.h,
            "z" => self.z,
            "alpha" => self.alpha,
            "V" => self.v,
            "G" => self.g,
            "S" => self.s,
            "inv_sigma" => self.inv_sigma,
            _ => return None,
        })
    }

    pub fn set_format(&mut self, name: &str, fmt: FixedPointFormat) -> Result<()> {
        let slot = match name {
            "H" => &mut self.h,
            "z" => &mut self.z,
            "alpha" => &mut self.alpha,
            "V" => &mut self.v,
            "G" => &mut self.g,
            "S" => &mut self.s,
            "inv_sigma" => &mut self.inv_sigma,
            _ => return Err(Error::Config(format!("unknown fixed-point signal {name:?}"))),
        };
        *slot = fmt;
        Ok(())
    }
}

impl Default for FixedPointPlan {
    fn default() -> Self {
        Self::hardware()
    }
}

/// Signals of one fixed-point iteration, all on their format grids.
#[derive(Debug)]
pub struct FixedIteration<'a> {
    /// One-based iteration index.
    pub iteration: usize,
    /// Quantized channel, one `W x U` matrix per antenna.
    pub h: &'a [CMat],
    /// `1/sigma~` as applied.
    pub inv_sigma: f64,
    /// `W x B`, column `b` is `z_b`.
    pub z: &'a CMat,
    /// `W x B`, column `b` is `alpha_b`.
    pub alpha: &'a CMat,
    /// `W x B`, column `b` is `V_b`.
    pub v: &'a CMat,
    /// `W x U` update `kappa G` as stored.
    pub g: &'a CMat,
    /// `W x U` iterate after the projection.
    pub s: &'a CMat,
}

pub(super) fn detect(
    bits: &ReceivedBits,
    chan: &FreqChannel,
    sigma: f64,
    cfg: &SystemConfig,
    params: &DetectorParams,
    plan: &FixedPointPlan,
    observe: &mut dyn FnMut(&FixedIteration<'_>),
) -> Result<DetectionResult> {
    let (w_len, users, antennas) = (cfg.subcarriers, cfg.users, cfg.antennas);
    let fft = FixedDft::new(w_len)?;
    let (fwd_shift, inv_shift) = fft.sqrt2_schedule()?;
    let inv_sigma = plan.inv_sigma.quantize(1.0 / params.effective_sigma(sigma));
    let h: Vec<CMat> = chan
        .per_antenna()
        .iter()
        .map(|hb| CMat::from_fn(w_len, users, |w, u| plan.h.quantize_complex(hb[(w, u)])))
        .collect();
    let scale = libm::ldexp(1.0, plan.s.fractional_bits() as i32);
    let bound = libm::floor(cfg.constellation().half_width() * scale) / scale;
    let z_frac = plan.z.fractional_bits();
    let omega_frac = plan.table.value_format().fractional_bits();

    let mut s = CMat::zeros(w_len, users);
    let mut z = CMat::zeros(w_len, antennas);
    let mut alpha = CMat::zeros(w_len, antennas);
    let mut v = CMat::zeros(w_len, antennas);
    let mut buf = vec![Complex64::new(0.0, 0.0); w_len];
    for k in 1..=params.iterations {
        let mut acc = CMat::zeros(w_len, users);
        for (b, hb) in h.iter().enumerate() {
            let r = bits.per_antenna[b].as_slice();
            extended_dot_into(hb, &s, &mut buf);
            for (w, x) in buf.iter_mut().enumerate() {
                *x = plan.z.quantize_complex(*x);
                z[(w, b)] = *x;
            }
            fft.transform(&mut buf, true, inv_shift, z_frac);
            for (w, x) in buf.iter_mut().enumerate() {
                let a = plan.alpha.quantize_complex(Complex64::new(
                    inv_sigma * r[w].re * x.re,
                    inv_sigma * r[w].im * x.im,
                ));
                alpha[(w, b)] = a;
                *x = Complex64::new(r[w].re * plan.table.eval(a.re), r[w].im * plan.table.eval(a.im));
            }
            fft.transform(&mut buf, false, fwd_shift, omega_frac);
            for (w, x) in buf.iter_mut().enumerate() {
                *x = plan.v.quantize_complex(*x);
                v[(w, b)] = *x;
            }
            accumulate_adjoint(&mut acc, hb, &buf);
        }
        let used = cfg.used_set();
        let g = CMat::from_fn(w_len, users, |w, u| {
            if used.contains(&w) {
                plan.g.quantize_complex(acc[(w, u)] * params.kappa)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for w in cfg.used_set() {
            for (si, gi) in s.row_mut(w).iter_mut().zip(g.row(w)) {
                *si = plan.s.quantize_complex(box_project(*si + gi, bound));
            }
        }
        observe(&FixedIteration {
            iteration: k,
            h: &h,
            inv_sigma,
            z: &z,
            alpha: &alpha,
            v: &v,
            g: &g,
            s: &s,
        });
    }
    Ok(finish(s, cfg, params.iterations, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{draw_channel, modulate, transmit};
    use crate::detect::{onebox_detect, onebox_detect_fixed_traced};
    use alloc::string::ToString;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plan_names_round_trip() {
        let mut p = FixedPointPlan::hardware();
        for name in SIGNAL_NAMES {
            let f = p.format(name).unwrap();
            p.set_format(name, FixedPointFormat::q(6, 6)).unwrap();
            assert_eq!(p.format(name), Some(FixedPointFormat::q(6, 6)));
            p.set_format(name, f).unwrap();
        }
        assert_eq!(p, FixedPointPlan::hardware());
        assert!(p.set_format("Q", FixedPointFormat::q(1, 1)).is_err());
        assert_eq!(p.format("S").unwrap().to_string(), "[2.7]");
    }

    fn link(seed: u64, snr: f64) -> (SystemConfig, FreqChannel, ReceivedBits, f64) {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
        let frame = modulate(&payload, &cfg).unwrap();
        let n0 = cfg.noise_from_snr(snr);
        let tx = transmit(&frame, &ch.freq, n0, &mut rng).unwrap();
        (cfg, ch.freq, tx.quantized, libm::sqrt(n0))
    }

    #[test]
    fn signals_live_on_their_grids() {
        let (cfg, chan, bits, sigma) = link(2, 10.0);
        let params = DetectorParams::fixed(&cfg);
        let plan = params.fixed_point.clone().unwrap();
        let on_grid = |m: &CMat, f: FixedPointFormat| {
            m.as_slice().iter().all(|z| f.represents(z.re) && f.represents(z.im))
        };
        let mut n = 0;
        onebox_detect_fixed_traced(&bits, &chan, sigma, &cfg, &params, &mut |it| {
            n += 1;
            assert!(it.h.iter().all(|h| on_grid(h, plan.h)));
            assert!(on_grid(it.z, plan.z));
            assert!(on_grid(it.alpha, plan.alpha));
            assert!(on_grid(it.v, plan.v));
            assert!(on_grid(it.g, plan.g));
            assert!(on_grid(it.s, plan.s));
            assert!(plan.inv_sigma.represents(it.inv_sigma));
            let hw = cfg.constellation().half_width();
            assert!(it.s.as_slice().iter().all(|z| z.re.abs() <= hw && z.im.abs() <= hw));
        })
        .unwrap();
        assert_eq!(n, 3);
    }

    #[test]
    fn agrees_with_the_floating_loop() {
        let mut differ = 0usize;
        let mut total = 0usize;
        for seed in 0..3 {
            let (cfg, chan, bits, sigma) = link(40 + seed, 10.0);
            let fx = onebox_detect(&bits, &chan, sigma, &cfg, &DetectorParams::fixed(&cfg)).unwrap();
            let fl = onebox_detect(&bits, &chan, sigma, &cfg, &DetectorParams::floating(&cfg)).unwrap();
            for (a, b) in fx.hard_bits.chunks(4).zip(fl.hard_bits.chunks(4)) {
                total += 1;
                differ += usize::from(a != b);
            }
        }
        assert!(differ * 50 <= total, "{differ} of {total} decisions differ");
    }

    #[test]
    fn even_transform_length_is_rejected() {
        let cfg = SystemConfig {
            subcarriers: 64,
            used_subcarriers: 50,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let frame = modulate(&alloc::vec![0; cfg.bits_per_frame()], &cfg).unwrap();
        let tx = transmit(&frame, &ch.freq, 0.1, &mut rng).unwrap();
        let r = onebox_detect(&tx.quantized, &ch.freq, 0.3, &cfg, &DetectorParams::fixed(&cfg));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
