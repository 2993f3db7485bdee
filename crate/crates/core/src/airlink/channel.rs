use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SystemConfig;
use crate::linalg::CMat;
use crate::{Error, Result};

/// Frequency-domain channel in both indexings.
///
/// `per_antenna[b]` is the `W x U` matrix `H_b`; `per_subcarrier[w]` is the
/// `B x U` matrix `H_w`. Row `w` of `H_b` equals row `b` of `H_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannel {
    per_antenna: Vec<CMat>,
    per_subcarrier: Vec<CMat>,
}

impl FreqChannel {
    pub fn from_per_antenna(per_antenna: Vec<CMat>) -> Result<Self> {
        let (w, u) = per_antenna
            .first()
            .map(CMat::shape)
            .ok_or_else(|| Error::Dimension("channel needs at least one antenna".into()))?;
        if per_antenna.iter().any(|h| h.shape() != (w, u)) {
            return Err(Error::Dimension("per-antenna matrices differ in shape".into()));
        }
        let b = per_antenna.len();
        let per_subcarrier = (0..w)
            .map(|wi| CMat::from_fn(b, u, |bi, ui| per_antenna[bi][(wi, ui)]))
            .collect();
        Ok(Self {
            per_antenna,
            per_subcarrier,
        })
    }

    pub fn per_antenna(&self) -> &[CMat] {
        &self.per_antenna
    }

    pub fn per_subcarrier(&self) -> &[CMat] {
        &self.per_subcarrier
    }

    pub fn antennas(&self) -> usize {
        self.per_antenna.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn users(&self) -> usize {
        self.per_antenna[0].cols()
    }

    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        if (self.antennas(), self.subcarriers(), self.users())
            != (cfg.antennas, cfg.subcarriers, cfg.users)
        {
            return Err(Error::Dimension(format!(
                "channel is {}x{}x{} (B x W x U), configuration expects {}x{}x{}",
                self.antennas(),
                self.subcarriers(),
                self.users(),
                cfg.antennas,
                cfg.subcarriers,
                cfg.users
            )));
        }
        Ok(())
    }
}

/// One channel draw: `L` time-domain taps and their frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `taps[t]` is the `B x U` matrix `H_t`.
    pub taps: Vec<CMat>,
    pub freq: FreqChannel,
}

/// `W x L` matrix mapping taps to subcarriers,
/// `K[w, t] = exp(-j 2 pi t (w - W/2) / W) / sqrt(W)`.
///
/// Its columns are orthonormal, so the transform preserves energy.
pub fn tap_to_subcarrier_kernel(subcarriers: usize, taps: usize) -> CMat {
    let w_len = subcarriers as f64;
    let norm = 1.0 / libm::sqrt(w_len);
    CMat::from_fn(subcarriers, taps, |w, t| {
        let offset = w as i64 - (subcarriers / 2) as i64;
        // reduce the phase index before scaling to keep the angle small
        let k = (t as i64 * offset).rem_euclid(subcarriers as i64);
        let (s, c) = libm::sincos(-2.0 * PI * k as f64 / w_len);
        Complex64::new(c * norm, s * norm)
    })
}

/// Frequency response of the taps on every subcarrier.
pub fn time_to_freq_channel(taps: &[CMat], cfg: &SystemConfig) -> Result<FreqChannel> {
    let l = taps.len();
    if l == 0 || l > cfg.subcarriers {
        return Err(Error::Dimension(format!(
            "{l} taps do not fit a {}-point transform",
            cfg.subcarriers
        )));
    }
    if taps.iter().any(|t| t.shape() != (cfg.antennas, cfg.users)) {
        return Err(Error::Dimension(format!(
            "taps must be {}x{} (B x U)",
            cfg.antennas, cfg.users
        )));
    }
    let kernel = tap_to_subcarrier_kernel(cfg.subcarriers, l);
    let per_antenna = (0..cfg.antennas)
        .map(|b| {
            CMat::from_fn(cfg.subcarriers, cfg.users, |w, u| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, tap) in taps.iter().enumerate() {
                    acc += kernel[(w, t)] * tap[(b, u)];
                }
                acc
            })
        })
        .collect();
    FreqChannel::from_per_antenna(per_antenna)
}

/// Per-entry variance of each tap: `E_h W / L`, so that
/// `E ||H_b||_F^2 = W U E_h`.
pub fn tap_variance(cfg: &SystemConfig) -> f64 {
    cfg.channel_energy * cfg.subcarriers as f64 / cfg.taps as f64
}

/// Draws i.i.d. Rayleigh taps with a uniform power-delay profile.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    cfg.validate()?;
    let std = libm::sqrt(tap_variance(cfg) / 2.0);
    let taps: Vec<CMat> = (0..cfg.taps)
        .map(|_| {
            CMat::from_fn(cfg.antennas, cfg.users, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re * std, im * std)
            })
        })
        .collect();
    let freq = time_to_freq_channel(&taps, cfg)?;
    Ok(ChannelRealization { taps, freq })
}
