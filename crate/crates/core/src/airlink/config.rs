use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::constellation::Constellation;
use crate::{Error, Result};

/// Data constellations supported by the link model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstellationKind {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstellationKind::Qpsk => "qpsk",
            ConstellationKind::Psk8 => "8psk",
            ConstellationKind::Qam16 => "16qam",
        })
    }
}

/// Dimensions and physical parameters of one uplink.
///
/// Subcarrier indices are zero-based throughout; subcarrier `w` corresponds
/// to the normalized frequency `(w - W/2) / W`, so the used band sits in the
/// middle of the index range and the guards at both edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Base-station antennas `B`.
    pub antennas: usize,
    /// Single-antenna users `U`.
    pub users: usize,
    /// OFDM subcarriers `W` (power of two).
    pub subcarriers: usize,
    /// Subcarriers carrying pilots or data.
    pub used_subcarriers: usize,
    /// Channel impulse-response length `L`.
    pub taps: usize,
    /// Cyclic-prefix length `P`; must cover `L - 1` samples.
    pub cyclic_prefix: usize,
    /// Training OFDM symbols per user `T`, giving `N_t = U T` pilot symbols.
    pub pilot_repetitions: usize,
    /// Data OFDM symbols per coherence block `N_d`.
    pub data_symbols: usize,
    /// Average symbol energy `E_s`.
    pub symbol_energy: f64,
    /// Average channel energy per entry `E_h`.
    pub channel_energy: f64,
    pub constellation: ConstellationKind,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 64,
            users: 4,
            subcarriers: 128,
            used_subcarriers: 100,
            taps: 3,
            cyclic_prefix: 16,
            pilot_repetitions: 2,
            data_symbols: 1,
            symbol_energy: 1.0,
            channel_energy: 1.0,
            constellation: ConstellationKind::Qam16,
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: alloc::string::String| Err(Error::Config(m));
        if self.users == 0 {
            return err("at least one user is required".into());
        }
        if self.antennas < self.users {
            return err(format!(
                "B = {} antennas cannot serve U = {} users",
                self.antennas, self.users
            ));
        }
        if self.subcarriers == 0 || !self.subcarriers.is_power_of_two() {
            return err(format!("W = {} is not a power of two", self.subcarriers));
        }
        if self.used_subcarriers == 0 || self.used_subcarriers > self.subcarriers {
            return err(format!(
                "W_used = {} must lie in 1..={}",
                self.used_subcarriers, self.subcarriers
            ));
        }
        if self.taps == 0 || self.taps > self.used_subcarriers {
            return err(format!(
                "L = {} taps must lie in 1..=W_used = {}",
                self.taps, self.used_subcarriers
            ));
        }
        if self.cyclic_prefix + 1 < self.taps {
            return err(format!(
                "cyclic prefix P = {} is shorter than L - 1 = {}",
                self.cyclic_prefix,
                self.taps - 1
            ));
        }
        if self.pilot_repetitions == 0 {
            return err("T must be at least 1".into());
        }
        if !(self.symbol_energy > 0.0 && self.symbol_energy.is_finite()) {
            return err(format!("E_s = {} must be positive", self.symbol_energy));
        }
        if !(self.channel_energy > 0.0 && self.channel_energy.is_finite()) {
            return err(format!("E_h = {} must be positive", self.channel_energy));
        }
        Ok(())
    }

    pub fn guard_subcarriers(&self) -> usize {
        self.subcarriers - self.used_subcarriers
    }

    /// First used subcarrier; `ceil(W_guard / 2)` guards sit below the band.
    pub fn first_used(&self) -> usize {
        self.guard_subcarriers().div_ceil(2)
    }

    /// Used subcarriers in ascending order.
    pub fn used_set(&self) -> core::ops::Range<usize> {
        let lo = self.first_used();
        lo..lo + self.used_subcarriers
    }

    pub fn guard_set(&self) -> Vec<usize> {
        let used = self.used_set();
        (0..self.subcarriers).filter(|w| !used.contains(w)).collect()
    }

    /// Per-subcarrier membership mask.
    pub fn used_mask(&self) -> Vec<bool> {
        let used = self.used_set();
        (0..self.subcarriers).map(|w| used.contains(&w)).collect()
    }

    pub fn is_used(&self, w: usize) -> bool {
        self.used_set().contains(&w)
    }

    /// `N_t = U T`
    pub fn training_symbols(&self) -> usize {
        self.users * self.pilot_repetitions
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.constellation, self.symbol_energy)
    }

    /// Payload bits per data OFDM symbol.
    pub fn bits_per_frame(&self) -> usize {
        self.users * self.used_subcarriers * self.constellation().bits_per_symbol()
    }

    /// Noise variance `N0` giving receive SNR `rho_db`, with
    /// `rho = W_used U E_s E_h / (W N0)`.
    pub fn noise_from_snr(&self, rho_db: f64) -> f64 {
        noise_from_snr(rho_db, self)
    }

    /// `sigma = sqrt(N0)`
    pub fn noise_std(&self, rho_db: f64) -> f64 {
        libm::sqrt(self.noise_from_snr(rho_db))
    }

    /// Target Frobenius norm of a per-antenna channel estimate restricted to
    /// the used band, `sqrt(W_used U E_h)`.
    pub fn channel_gain(&self) -> f64 {
        libm::sqrt(self.used_subcarriers as f64 * self.users as f64 * self.channel_energy)
    }
}

/// `N0 = W_used U E_s E_h / (W 10^(rho_db / 10))`
pub fn noise_from_snr(rho_db: f64, cfg: &SystemConfig) -> f64 {
    let signal = cfg.used_subcarriers as f64
        * cfg.users as f64
        * cfg.symbol_energy
        * cfg.channel_energy
        / cfg.subcarriers as f64;
    signal / libm::pow(10.0, rho_db / 10.0)
}
