use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::channel::FreqChannel;
use super::config::SystemConfig;
use crate::linalg::CMat;
use crate::numerics::DftPlan;
use crate::{Error, Result};

/// Frequency-domain symbols of one OFDM symbol, `W x U` (column `u` belongs
/// to user `u`). Guard rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: CMat,
    /// Bits mapped onto the used rows; empty for pilots.
    pub payload_bits: Vec<u8>,
}

/// 1-bit observations, one `W x N` matrix per antenna (`N = 1` for a data
/// symbol, `N = N_t` for training). Every entry is `+-1 +-j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBits {
    pub per_antenna: Vec<CMat>,
}

impl ReceivedBits {
    pub fn antennas(&self) -> usize {
        self.per_antenna.len()
    }

    /// Number of OFDM symbols per antenna.
    pub fn symbols(&self) -> usize {
        self.per_antenna.first().map_or(0, CMat::cols)
    }

    /// Observation of antenna `b` during OFDM symbol `n`.
    pub fn observation(&self, b: usize, n: usize) -> Vec<Complex64> {
        self.per_antenna[b].column(n)
    }

    /// Splits a multi-symbol block into single-symbol observations.
    pub fn symbol(&self, n: usize) -> ReceivedBits {
        ReceivedBits {
            per_antenna: self
                .per_antenna
                .iter()
                .map(|r| CMat::from_fn(r.rows(), 1, |w, _| r[(w, n)]))
                .collect(),
        }
    }

    pub fn is_one_bit(&self) -> bool {
        self.per_antenna.iter().all(|r| {
            r.as_slice()
                .iter()
                .all(|z| z.re.abs() == 1.0 && z.im.abs() == 1.0)
        })
    }
}

/// Unquantized and quantized receive signals for a block of OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// `Y_b`, `W x N` per antenna, after cyclic-prefix removal.
    pub unquantized: Vec<CMat>,
    pub quantized: ReceivedBits,
}

impl Transmission {
    /// The unquantized samples in the same container as the 1-bit ones, for
    /// the infinite-resolution baselines.
    pub fn unquantized_as_observations(&self) -> ReceivedBits {
        ReceivedBits {
            per_antenna: self.unquantized.clone(),
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `Q(z) = sign(Re z) + j sign(Im z)` with `sign(0) = -1`.
#[inline]
pub fn quantize_sample(z: Complex64) -> Complex64 {
    Complex64::new(sign(z.re), sign(z.im))
}

/// Entry-wise 1-bit quantization.
pub fn one_bit_quantize(y: &[Complex64]) -> Vec<Complex64> {
    y.iter().map(|&z| quantize_sample(z)).collect()
}

/// `c[m] = sum_u A[m, u] B[m, u]`, row-wise products without conjugation.
pub fn extended_dot(a: &CMat, b: &CMat) -> Result<Vec<Complex64>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "extended dot product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.rows()];
    extended_dot_into(a, b, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn extended_dot_into(a: &CMat, b: &CMat, out: &mut [Complex64]) {
    for (m, o) in out.iter_mut().enumerate() {
        *o = a
            .row(m)
            .iter()
            .zip(b.row(m))
            .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x * y);
    }
}

/// Maps payload bits onto the used subcarriers.
///
/// Bits are consumed subcarrier by subcarrier (ascending), then user by
/// user, `bits_per_symbol` bits MSB first per symbol.
pub fn modulate(bits: &[u8], cfg: &SystemConfig) -> Result<SymbolFrame> {
    let cons = cfg.constellation();
    let bps = cons.bits_per_symbol();
    let expected = cfg.bits_per_frame();
    if bits.len() != expected {
        return Err(Error::Dimension(format!(
            "{} payload bits given, a frame carries {expected}",
            bits.len()
        )));
    }
    let mut symbols = CMat::zeros(cfg.subcarriers, cfg.users);
    let mut chunks = bits.chunks_exact(bps);
    for w in cfg.used_set() {
        for u in 0..cfg.users {
            let chunk = chunks.next().expect("length checked above");
            symbols[(w, u)] = cons.point_for_label(cons.label_from_bits(chunk));
        }
    }
    Ok(SymbolFrame {
        symbols,
        payload_bits: bits.to_vec(),
    })
}

/// Nearest-point slicing of the used rows, returned in [`modulate`] bit
/// order. Ties go to the lowest point index.
pub fn demodulate(s_hat: &CMat, cfg: &SystemConfig) -> Vec<u8> {
    let cons = cfg.constellation();
    let mut bits = Vec::with_capacity(cfg.bits_per_frame());
    for w in cfg.used_set() {
        for u in 0..cfg.users {
            let i = cons.nearest(s_hat[(w, u)]);
            cons.push_label_bits(cons.labels()[i], &mut bits);
        }
    }
    bits
}

/// Passes a block of OFDM symbols through the channel.
///
/// For each symbol and antenna: `z_b = H_b (ext. dot) S`,
/// `y_b = F^H z_b + n_b` with `n_b ~ CN(0, N0 I)`, `r_b = Q(y_b)`. The
/// cyclic prefix is not generated; with `P >= L - 1` it turns the channel
/// into the circular convolution modelled here. Noise is drawn symbol by
/// symbol, antenna by antenna, sample by sample (real then imaginary).
pub fn transmit_block<R: Rng + ?Sized>(
    frames: &[&CMat],
    chan: &FreqChannel,
    n0: f64,
    rng: &mut R,
) -> Result<Transmission> {
    if !(n0 >= 0.0) {
        return Err(Error::Config(format!("noise variance {n0} is negative")));
    }
    let (w_len, users) = (chan.subcarriers(), chan.users());
    if frames.iter().any(|s| s.shape() != (w_len, users)) {
        return Err(Error::Dimension(format!("symbol frames must be {w_len}x{users}")));
    }
    let plan = DftPlan::new(w_len)?;
    let std = libm::sqrt(n0 / 2.0);
    let n = frames.len();
    let mut unquantized: Vec<CMat> = (0..chan.antennas()).map(|_| CMat::zeros(w_len, n)).collect();
    let mut quantized: Vec<CMat> = unquantized.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); w_len];
    for (k, s) in frames.iter().enumerate() {
        for (b, h_b) in chan.per_antenna().iter().enumerate() {
            extended_dot_into(h_b, s, &mut buf);
            plan.inverse(&mut buf);
            for (w, y) in buf.iter().enumerate() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let y = y + Complex64::new(re * std, im * std);
                unquantized[b][(w, k)] = y;
                quantized[b][(w, k)] = quantize_sample(y);
            }
        }
    }
    Ok(Transmission {
        unquantized,
        quantized: ReceivedBits {
            per_antenna: quantized,
        },
    })
}

/// [`transmit_block`] for a single OFDM symbol.
pub fn transmit<R: Rng + ?Sized>(
    frame: &SymbolFrame,
    chan: &FreqChannel,
    n0: f64,
    rng: &mut R,
) -> Result<Transmission> {
    transmit_block(&[&frame.symbols], chan, n0, rng)
}
