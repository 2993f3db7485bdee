//! Data detection from 1-bit observations.
//!
//! [`onebox_detect`] solves the box-relaxed maximum-likelihood problem by
//! forward-backward splitting: a gradient step on the probit likelihood
//! followed by projection onto the box `max(|Re|, |Im|) <= S_X`. The same
//! loop runs either in double precision or through a bit-accurate
//! fixed-point emulation ([`FixedPointPlan`]). [`zf_detect`] is the
//! quantization-unaware baseline.

mod fixed;
pub(crate) mod likelihood;
mod zf;

pub use fixed::{FixedIteration, FixedPointPlan, SIGNAL_NAMES};
pub use zf::{zf_detect, ZfDetector};

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::airlink::{demodulate, FreqChannel, ReceivedBits, SystemConfig};
use crate::linalg::CMat;
use crate::numerics::{box_project, DftPlan, MillsRatio};
use crate::{Error, Result};

use likelihood::Term;

/// Step size of the floating-point loop.
pub const FLOAT_STEP: f64 = SQRT_2 / 64.0;
/// Step size of the fixed-point loop; its transforms carry an extra `1/sqrt2`.
pub const FIXED_STEP: f64 = 1.0 / 32.0;
/// SNR whose noise level is the default floor on `sigma`.
pub const SIGMA_FLOOR_SNR_DB: f64 = 10.0;

/// Tuning of the 1BOX loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Iteration count `K`.
    pub iterations: usize,
    /// Step size `kappa`; the gradient prefactor is folded in.
    pub kappa: f64,
    /// Lower bound `sigma'` on the noise standard deviation, `None` to use
    /// `sigma` as given.
    pub sigma_floor: Option<f64>,
    /// Inverse Mills ratio used by the floating-point loop.
    pub mills: MillsRatio,
    /// Word formats for the fixed-point loop; `None` runs in double
    /// precision.
    pub fixed_point: Option<FixedPointPlan>,
}

impl DetectorParams {
    /// `K = 3`, `kappa = sqrt2/64`, exact `omega`, and the floor at the
    /// noise level of 10 dB for `cfg`.
    pub fn floating(cfg: &SystemConfig) -> Self {
        Self {
            iterations: 3,
            kappa: FLOAT_STEP,
            sigma_floor: Some(cfg.noise_std(SIGMA_FLOOR_SNR_DB)),
            mills: MillsRatio::Exact,
            fixed_point: None,
        }
    }

    /// Hardware word lengths with `kappa = 1/32`.
    pub fn fixed(cfg: &SystemConfig) -> Self {
        Self {
            kappa: FIXED_STEP,
            fixed_point: Some(FixedPointPlan::hardware()),
            ..Self::floating(cfg)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa = {} must be positive", self.kappa)));
        }
        if let Some(f) = self.sigma_floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::Config(format!("sigma floor {f} must be positive")));
            }
        }
        Ok(())
    }

    /// `max(sigma, sigma')`
    pub fn effective_sigma(&self, sigma: f64) -> f64 {
        match self.sigma_floor {
            Some(f) => sigma.max(f),
            None => sigma,
        }
    }
}

/// Output of a detector for one OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Solver output before rescaling (`W x U`).
    pub relaxed: CMat,
    /// Output rescaled to the constellation energy.
    pub normalized: CMat,
    /// Sliced bits in payload order.
    pub hard_bits: Vec<u8>,
    pub iterations_run: usize,
    /// The solver returned all zeros; every symbol was mapped to the first
    /// constellation point.
    pub degenerate: bool,
    /// Subcarriers whose linear system could not be solved.
    pub erased: Vec<usize>,
}

fn check_inputs(bits: &ReceivedBits, chan: &FreqChannel, cfg: &SystemConfig) -> Result<()> {
    chan.check_against(cfg)?;
    if bits.antennas() != cfg.antennas {
        return Err(Error::Dimension(format!(
            "{} antennas observed, configuration has {}",
            bits.antennas(),
            cfg.antennas
        )));
    }
    if bits
        .per_antenna
        .iter()
        .any(|r| r.shape() != (cfg.subcarriers, 1))
    {
        return Err(Error::Dimension(format!(
            "detection expects one OFDM symbol of {} samples per antenna",
            cfg.subcarriers
        )));
    }
    Ok(())
}

fn terms<'a>(bits: &'a ReceivedBits, chan: &'a FreqChannel) -> Vec<Term<'a>> {
    chan.per_antenna()
        .iter()
        .zip(&bits.per_antenna)
        .map(|(a, r)| Term { a, r: r.as_slice() })
        .collect()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise standard deviation {sigma} must be positive")))
    }
}

/// Negative log-likelihood of the 1-bit observations given `s_tilde`.
pub fn objective(
    s_tilde: &CMat,
    chan: &FreqChannel,
    bits: &ReceivedBits,
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let cfg = shape_config(chan);
    check_inputs(bits, chan, &cfg)?;
    if s_tilde.shape() != (chan.subcarriers(), chan.users()) {
        return Err(Error::Dimension(format!(
            "symbol matrix is {:?}, channel expects {}x{}",
            s_tilde.shape(),
            chan.subcarriers(),
            chan.users()
        )));
    }
    let plan = DftPlan::new(chan.subcarriers())?;
    Ok(likelihood::neg_log_likelihood(&terms(bits, chan), s_tilde, sigma, &plan))
}

/// Descent direction `G` of the objective and its prefactor.
///
/// The negative Wirtinger gradient with respect to `conj(S)` is
/// `prefactor * G` with `prefactor = sqrt2 / (2 sigma)`.
pub fn gradient(
    s_tilde: &CMat,
    chan: &FreqChannel,
    bits: &ReceivedBits,
    sigma: f64,
    mills: &MillsRatio,
) -> Result<(CMat, f64)> {
    objective(s_tilde, chan, bits, sigma)?;
    let plan = DftPlan::new(chan.subcarriers())?;
    let g = likelihood::descent_direction(&terms(bits, chan), s_tilde, sigma, mills, &plan);
    Ok((g, SQRT_2 / (2.0 * sigma)))
}

/// Minimal configuration carrying only the dimensions of `chan`, for the
/// shape checks of the dimension-generic entry points.
fn shape_config(chan: &FreqChannel) -> SystemConfig {
    SystemConfig {
        antennas: chan.antennas(),
        users: chan.users(),
        subcarriers: chan.subcarriers(),
        ..SystemConfig::default()
    }
}

/// Rescales `relaxed` to Frobenius norm `E_s sqrt(U W_used)`.
pub fn normalize_symbols(relaxed: &CMat, cfg: &SystemConfig) -> Result<CMat> {
    let norm = relaxed.frobenius();
    if norm == 0.0 {
        return Err(Error::Degenerate("relaxed symbol estimate is all zero".into()));
    }
    let target = cfg.symbol_energy * libm::sqrt((cfg.users * cfg.used_subcarriers) as f64);
    let mut out = relaxed.clone();
    out.scale(target / norm);
    Ok(out)
}

/// Normalizes and slices a relaxed estimate.
pub(crate) fn finish(
    relaxed: CMat,
    cfg: &SystemConfig,
    iterations_run: usize,
    erased: Vec<usize>,
) -> DetectionResult {
    match normalize_symbols(&relaxed, cfg) {
        Ok(normalized) => {
            let hard_bits = demodulate(&normalized, cfg);
            DetectionResult {
                relaxed,
                normalized,
                hard_bits,
                iterations_run,
                degenerate: false,
                erased,
            }
        }
        Err(_) => {
            let cons = cfg.constellation();
            let mut hard_bits = Vec::with_capacity(cfg.bits_per_frame());
            for _ in 0..cfg.users * cfg.used_subcarriers {
                cons.push_label_bits(cons.labels()[0], &mut hard_bits);
            }
            DetectionResult {
                normalized: relaxed.clone(),
                relaxed,
                hard_bits,
                iterations_run,
                degenerate: true,
                erased,
            }
        }
    }
}

/// 1BOX detection of one OFDM symbol.
pub fn onebox_detect(
    bits: &ReceivedBits,
    chan: &FreqChannel,
    sigma: f64,
    cfg: &SystemConfig,
    params: &DetectorParams,
) -> Result<DetectionResult> {
    onebox_detect_observed(bits, chan, sigma, cfg, params, &mut |_, _| {})
}

/// [`onebox_detect`] calling `observe(k, S_k)` after every iteration
/// `k = 1..=K` of the floating-point loop.
pub fn onebox_detect_observed(
    bits: &ReceivedBits,
    chan: &FreqChannel,
    sigma: f64,
    cfg: &SystemConfig,
    params: &DetectorParams,
    observe: &mut dyn FnMut(usize, &CMat),
) -> Result<DetectionResult> {
    params.validate()?;
    check_sigma(sigma)?;
    check_inputs(bits, chan, cfg)?;
    if let Some(plan) = &params.fixed_point {
        return fixed::detect(bits, chan, sigma, cfg, params, plan, &mut |_| {});
    }
    let sigma_eff = params.effective_sigma(sigma);
    let half_width = cfg.constellation().half_width();
    let plan = DftPlan::new(cfg.subcarriers)?;
    let terms = terms(bits, chan);
    let mut s = CMat::zeros(cfg.subcarriers, cfg.users);
    for k in 1..=params.iterations {
        let g = likelihood::descent_direction(&terms, &s, sigma_eff, &params.mills, &plan);
        for w in cfg.used_set() {
            for (si, gi) in s.row_mut(w).iter_mut().zip(g.row(w)) {
                *si = box_project(*si + params.kappa * gi, half_width);
            }
        }
        observe(k, &s);
    }
    Ok(finish(s, cfg, params.iterations, Vec::new()))
}

/// Fixed-point 1BOX calling `observe` with every iteration's signals.
///
/// Fails with [`Error::Config`] if `params` has no fixed-point plan.
pub fn onebox_detect_fixed_traced(
    bits: &ReceivedBits,
    chan: &FreqChannel,
    sigma: f64,
    cfg: &SystemConfig,
    params: &DetectorParams,
    observe: &mut dyn FnMut(&FixedIteration<'_>),
) -> Result<DetectionResult> {
    params.validate()?;
    check_sigma(sigma)?;
    check_inputs(bits, chan, cfg)?;
    let plan = params
        .fixed_point
        .as_ref()
        .ok_or_else(|| Error::Config("detector has no fixed-point plan".into()))?;
    fixed::detect(bits, chan, sigma, cfg, params, plan, observe)
}

/// Real multiplications of `K` 1BOX iterations:
/// `K (8BUW + 4BW log2 W + BW + 2UW)`.
pub fn count_multiplications(cfg: &SystemConfig, iterations: u64) -> u64 {
    let (b, u, w) = (cfg.antennas as u64, cfg.users as u64, cfg.subcarriers as u64);
    let log2w = u64::from(w.trailing_zeros());
    iterations * (8 * b * u * w + 4 * b * w * log2w + b * w + 2 * u * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{draw_channel, modulate, transmit, ConstellationKind};
    use crate::numerics::log_normal_cdf;
    use alloc::vec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_link(h: Complex64, r: Complex64) -> (FreqChannel, ReceivedBits) {
        let chan = FreqChannel::from_per_antenna(vec![CMat::from_fn(1, 1, |_, _| h)]).unwrap();
        let bits = ReceivedBits {
            per_antenna: vec![CMat::from_fn(1, 1, |_, _| r)],
        };
        (chan, bits)
    }

    #[test]
    fn scalar_objective_value() {
        let (chan, bits) = scalar_link(Complex64::new(1.0, 0.0), Complex64::new(1.0, 1.0));
        let s = CMat::from_fn(1, 1, |_, _| Complex64::new(1.0, 1.0));
        let f = objective(&s, &chan, &bits, SQRT_2).unwrap();
        // -2 ln Phi(1)
        assert!((f - 0.345_507_558_046_899_8).abs() < 1e-14, "{f}");
        assert!((f + 2.0 * log_normal_cdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn objective_at_origin_is_2bw_ln2() {
        let cfg = SystemConfig {
            antennas: 3,
            users: 2,
            subcarriers: 8,
            used_subcarriers: 6,
            taps: 2,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let bits = ReceivedBits {
            per_antenna: (0..3)
                .map(|_| {
                    CMat::from_fn(8, 1, |_, _| {
                        Complex64::new(if rng.random() { 1.0 } else { -1.0 }, -1.0)
                    })
                })
                .collect(),
        };
        let f = objective(&CMat::zeros(8, 2), &ch.freq, &bits, 0.7).unwrap();
        assert!((f - 2.0 * 3.0 * 8.0 * core::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(
            objective(&CMat::zeros(8, 2), &ch.freq, &bits, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gradient_at_origin_is_transform_of_bits() {
        let cfg = SystemConfig {
            antennas: 2,
            users: 1,
            subcarriers: 8,
            used_subcarriers: 8,
            taps: 1,
            cyclic_prefix: 0,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let r: Vec<CMat> = (0..2)
            .map(|_| {
                CMat::from_fn(8, 1, |_, _| {
                    let s = |b: bool| if b { 1.0 } else { -1.0 };
                    Complex64::new(s(rng.random()), s(rng.random()))
                })
            })
            .collect();
        let bits = ReceivedBits { per_antenna: r.clone() };
        let (g, pre) = gradient(&CMat::zeros(8, 1), &ch.freq, &bits, 0.9, &MillsRatio::Exact).unwrap();
        assert!((pre - SQRT_2 / 1.8).abs() < 1e-15);
        let omega0 = 2.0 / libm::sqrt(2.0 * core::f64::consts::PI);
        let fr: Vec<Vec<Complex64>> = r
            .iter()
            .map(|m| crate::numerics::unitary_dft(m.as_slice(), false).unwrap())
            .collect();
        for w in 0..8 {
            let mut e = Complex64::new(0.0, 0.0);
            for b in 0..2 {
                e += ch.freq.per_antenna()[b][(w, 0)].conj() * fr[b][w] * omega0;
            }
            assert!((g[(w, 0)] - e).norm() < 1e-12);
        }
    }

    #[test]
    fn complexity_worked_values() {
        let big = SystemConfig {
            antennas: 128,
            users: 8,
            ..SystemConfig::default()
        };
        assert_eq!(count_multiplications(&big, 1), 1_525_760);
        assert_eq!(count_multiplications(&big, 3), 4_577_280);
        assert_eq!(count_multiplications(&SystemConfig::default(), 1), 500_736);
    }

    #[test]
    fn normalization_hits_target_and_rejects_zero() {
        let cfg = SystemConfig::default();
        let m = CMat::from_fn(128, 4, |w, u| Complex64::new((w + u) as f64 * 0.01, 0.3));
        let n = normalize_symbols(&m, &cfg).unwrap();
        assert!((n.frobenius() - 20.0).abs() < 1e-12);
        let mut scaled = m.clone();
        scaled.scale(7.5);
        let n2 = normalize_symbols(&scaled, &cfg).unwrap();
        for (a, b) in n.as_slice().iter().zip(n2.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        let again = normalize_symbols(&n, &cfg).unwrap();
        for (a, b) in n.as_slice().iter().zip(again.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(
            normalize_symbols(&CMat::zeros(128, 4), &cfg),
            Err(Error::Degenerate(_))
        ));
    }

    fn qpsk_link(seed: u64, snr_db: f64) -> (SystemConfig, FreqChannel, ReceivedBits, Vec<u8>, f64) {
        let cfg = SystemConfig {
            constellation: ConstellationKind::Qpsk,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
        let frame = modulate(&payload, &cfg).unwrap();
        let n0 = cfg.noise_from_snr(snr_db);
        let tx = transmit(&frame, &ch.freq, n0, &mut rng).unwrap();
        (cfg, ch.freq, tx.quantized, payload, libm::sqrt(n0))
    }

    #[test]
    fn zero_step_is_rejected_and_zero_output_is_degenerate() {
        let (cfg, chan, bits, _, sigma) = qpsk_link(1, 10.0);
        let params = DetectorParams {
            kappa: 0.0,
            ..DetectorParams::floating(&cfg)
        };
        assert!(matches!(
            onebox_detect(&bits, &chan, sigma, &cfg, &params),
            Err(Error::Config(_))
        ));
        let zero = finish(CMat::zeros(cfg.subcarriers, cfg.users), &cfg, 3, Vec::new());
        assert!(zero.degenerate);
        let cons = cfg.constellation();
        assert_eq!(zero.hard_bits.len(), cfg.bits_per_frame());
        assert!(zero.hard_bits.chunks(2).all(|c| cons.label_from_bits(c) == cons.labels()[0]));
    }

    #[test]
    fn iterates_stay_in_the_box() {
        let (cfg, chan, bits, _, sigma) = qpsk_link(5, 0.0);
        let params = DetectorParams {
            iterations: 6,
            kappa: 0.5,
            ..DetectorParams::floating(&cfg)
        };
        let hw = cfg.constellation().half_width();
        let used = cfg.used_mask();
        let mut seen = 0;
        onebox_detect_observed(&bits, &chan, sigma, &cfg, &params, &mut |_, s| {
            seen += 1;
            for w in 0..cfg.subcarriers {
                for z in s.row(w) {
                    if used[w] {
                        assert!(z.re.abs() <= hw && z.im.abs() <= hw);
                    } else {
                        assert_eq!(*z, Complex64::new(0.0, 0.0));
                    }
                }
            }
        })
        .unwrap();
        assert_eq!(seen, 6);
    }

    #[test]
    fn noiseless_qpsk_is_recovered() {
        let mut correct = 0usize;
        let mut total = 0usize;
        for seed in 0..4 {
            let (cfg, chan, bits, payload, sigma) = qpsk_link(100 + seed, 40.0);
            let res = onebox_detect(&bits, &chan, sigma, &cfg, &DetectorParams::floating(&cfg)).unwrap();
            for (a, b) in res.hard_bits.chunks(2).zip(payload.chunks(2)) {
                total += 1;
                correct += usize::from(a == b);
            }
        }
        assert!(correct as f64 >= 0.99 * total as f64, "{correct}/{total}");
    }

    #[test]
    fn floor_is_inert_above_it() {
        let (cfg, chan, bits, _, sigma) = qpsk_link(9, 0.0);
        let with = DetectorParams::floating(&cfg);
        assert!(sigma >= with.sigma_floor.unwrap());
        let without = DetectorParams {
            sigma_floor: None,
            ..with.clone()
        };
        let a = onebox_detect(&bits, &chan, sigma, &cfg, &with).unwrap();
        let b = onebox_detect(&bits, &chan, sigma, &cfg, &without).unwrap();
        assert_eq!(a, b);
    }
}
