//! Channel estimation from 1-bit training observations.
//!
//! The base station observes `N_t = U T` pilot OFDM symbols per antenna.
//! [`zf_chest`] solves the per-subcarrier least-squares problem ignoring the
//! quantizer; [`ngd_chest`] refines that estimate by normalized gradient
//! ascent on the 1-bit likelihood. Either estimate is then projected onto
//! the `L`-tap subspace ([`Tdmle`]) and rescaled to the known average
//! channel gain ([`normalize_channel`]).

mod tdmle;

pub use tdmle::{tdmle_denoise, Tdmle};

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::airlink::{ConstellationKind, Constellation, ReceivedBits, SystemConfig};
use crate::detect::likelihood::{columns, descent_direction, neg_log_likelihood, Term};
use crate::linalg::{CMat, Cholesky, NormalEquations};
use crate::numerics::{DftPlan, MillsRatio};
use crate::{Error, Result};

/// Training symbols, viewed per OFDM symbol and per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    /// `N_t` matrices `T_n` of shape `W x U`.
    pub frames: Vec<CMat>,
    /// `W` matrices `T_w` of shape `N_t x U`.
    pub per_subcarrier: Vec<CMat>,
}

impl PilotSet {
    pub fn from_frames(frames: Vec<CMat>) -> Result<Self> {
        let (w, u) = frames
            .first()
            .map(CMat::shape)
            .ok_or_else(|| Error::Dimension("at least one pilot frame is required".into()))?;
        if frames.iter().any(|f| f.shape() != (w, u)) {
            return Err(Error::Dimension("pilot frames differ in shape".into()));
        }
        let n = frames.len();
        let per_subcarrier = (0..w)
            .map(|wi| CMat::from_fn(n, u, |ni, ui| frames[ni][(wi, ui)]))
            .collect();
        Ok(Self {
            frames,
            per_subcarrier,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_refs(&self) -> Vec<&CMat> {
        self.frames.iter().collect()
    }
}

/// Redraws of a rank-deficient pilot set before giving up.
const PILOT_ATTEMPTS: usize = 64;

/// i.i.d. uniform QPSK pilots of energy `E_s` on the used rows.
///
/// Symbols are drawn frame by frame, subcarrier by subcarrier, user by user.
/// A draw in which some `T_w` lacks full column rank is discarded and the
/// whole set drawn again, so the result always admits [`zf_chest`].
pub fn generate_pilots<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<PilotSet> {
    cfg.validate()?;
    let qpsk = Constellation::new(ConstellationKind::Qpsk, cfg.symbol_energy);
    for _ in 0..PILOT_ATTEMPTS {
        let frames = (0..cfg.training_symbols())
            .map(|_| {
                let mut t = CMat::zeros(cfg.subcarriers, cfg.users);
                for w in cfg.used_set() {
                    for u in 0..cfg.users {
                        t[(w, u)] = qpsk.points()[rng.random_range(0..4)];
                    }
                }
                t
            })
            .collect();
        let set = PilotSet::from_frames(frames)?;
        if cfg
            .used_set()
            .all(|w| Cholesky::new(&set.per_subcarrier[w].gram()).is_ok())
        {
            return Ok(set);
        }
    }
    Err(Error::Singular(format!(
        "no full-rank pilot set in {PILOT_ATTEMPTS} draws"
    )))
}

/// Settings of the estimation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ChestParams {
    /// NGD iterations `K`; zero returns the ZF estimate.
    pub iterations: usize,
    /// Length of each normalized step.
    pub step: f64,
    /// Apply TDMLE before rescaling.
    pub denoise: bool,
    /// Per-antenna Frobenius norm `gamma` of the rescaled estimate.
    pub gamma: f64,
    pub mills: MillsRatio,
}

impl ChestParams {
    /// `K = 5`, step `1/16`, denoising on, `gamma` from `cfg`.
    pub fn for_config(cfg: &SystemConfig) -> Self {
        Self {
            iterations: 5,
            step: 1.0 / 16.0,
            denoise: true,
            gamma: cfg.channel_gain(),
            mills: MillsRatio::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("NGD step {} must be positive", self.step)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma = {} must be positive", self.gamma)));
        }
        Ok(())
    }
}

fn check_training(train: &ReceivedBits, pilots: &PilotSet, cfg: &SystemConfig) -> Result<()> {
    if train.antennas() != cfg.antennas
        || train
            .per_antenna
            .iter()
            .any(|r| r.shape() != (cfg.subcarriers, pilots.len()))
    {
        return Err(Error::Dimension(format!(
            "training needs {} antennas of {}x{} samples",
            cfg.antennas,
            cfg.subcarriers,
            pilots.len()
        )));
    }
    if pilots.frames[0].shape() != (cfg.subcarriers, cfg.users) {
        return Err(Error::Dimension(format!(
            "pilot frames must be {}x{}",
            cfg.subcarriers, cfg.users
        )));
    }
    if pilots.len() < cfg.users {
        return Err(Error::Config(format!(
            "{} pilot symbols cannot separate {} users",
            pilots.len(),
            cfg.users
        )));
    }
    Ok(())
}

/// Per-antenna least-squares estimates `(T_w^H T_w)^-1 T_w^H (F R_b)_w`
/// on the used subcarriers; guard rows are zero.
///
/// Works on 1-bit or unquantized training samples alike. A singular pilot
/// Gram matrix fails with [`Error::Singular`]; draw new pilots.
pub fn zf_chest(train: &ReceivedBits, pilots: &PilotSet, cfg: &SystemConfig) -> Result<Vec<CMat>> {
    check_training(train, pilots, cfg)?;
    let plan = DftPlan::new(cfg.subcarriers)?;
    let solvers = cfg
        .used_set()
        .map(|w| {
            NormalEquations::new(pilots.per_subcarrier[w].clone()).map_err(|e| {
                Error::Singular(format!("pilots on subcarrier {w} are not full rank ({e}); regenerate them"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_t = pilots.len();
    let mut out = Vec::with_capacity(cfg.antennas);
    let mut rt = CMat::zeros(cfg.subcarriers, n_t);
    for r in &train.per_antenna {
        for (n, mut col) in columns(r).into_iter().enumerate() {
            plan.forward(&mut col);
            rt.set_column(n, &col);
        }
        let mut h = CMat::zeros(cfg.subcarriers, cfg.users);
        for (w, ne) in cfg.used_set().zip(&solvers) {
            h.row_mut(w).copy_from_slice(&ne.solve(rt.row(w)));
        }
        out.push(h);
    }
    Ok(out)
}

/// Log-likelihood of one antenna's training observations `r_b`
/// (`W x N_t`) given the channel `h_b` (`W x U`).
pub fn training_log_likelihood(
    h_b: &CMat,
    pilots: &PilotSet,
    r_b: &CMat,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise standard deviation {sigma} must be positive")));
    }
    if r_b.shape() != (h_b.rows(), pilots.len()) || pilots.frames[0].shape() != h_b.shape() {
        return Err(Error::Dimension("training shapes disagree".into()));
    }
    let plan = DftPlan::new(h_b.rows())?;
    let cols = columns(r_b);
    let terms = training_terms(pilots, &cols);
    Ok(-neg_log_likelihood(&terms, h_b, sigma, &plan))
}

fn training_terms<'a>(pilots: &'a PilotSet, cols: &'a [Vec<Complex64>]) -> Vec<Term<'a>> {
    pilots
        .frames
        .iter()
        .zip(cols)
        .map(|(a, r)| Term { a, r })
        .collect()
}

/// Normalized gradient ascent on the per-antenna 1-bit log-likelihood,
/// started from [`zf_chest`].
///
/// Each step moves `H_b` by `step * G_b / ||G_b||_F`; a zero gradient ends
/// that antenna's iterations.
pub fn ngd_chest(
    train: &ReceivedBits,
    pilots: &PilotSet,
    cfg: &SystemConfig,
    params: &ChestParams,
    sigma: f64,
) -> Result<Vec<CMat>> {
    ngd_chest_observed(train, pilots, cfg, params, sigma, &mut |_, _, _| {})
}

/// [`ngd_chest`] calling `observe(b, k, H_b)` after step `k` of antenna `b`
/// (and with `k = 0` for the initialization).
pub fn ngd_chest_observed(
    train: &ReceivedBits,
    pilots: &PilotSet,
    cfg: &SystemConfig,
    params: &ChestParams,
    sigma: f64,
    observe: &mut dyn FnMut(usize, usize, &CMat),
) -> Result<Vec<CMat>> {
    params.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("noise standard deviation {sigma} must be positive")));
    }
    let mut est = zf_chest(train, pilots, cfg)?;
    let plan = DftPlan::new(cfg.subcarriers)?;
    for (b, (h, r)) in est.iter_mut().zip(&train.per_antenna).enumerate() {
        observe(b, 0, h);
        let cols = columns(r);
        let terms = training_terms(pilots, &cols);
        for k in 1..=params.iterations {
            let g = descent_direction(&terms, h, sigma, &params.mills, &plan);
            let norm = g.frobenius();
            if norm == 0.0 {
                break;
            }
            let s = params.step / norm;
            for (hi, gi) in h.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *hi += s * gi;
            }
            observe(b, k, h);
        }
    }
    Ok(est)
}

/// Rescales every per-antenna estimate to Frobenius norm `gamma`.
pub fn normalize_channel(h: &[CMat], gamma: f64) -> Result<Vec<CMat>> {
    h.iter()
        .enumerate()
        .map(|(b, hb)| {
            let norm = hb.frobenius();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!("channel estimate of antenna {b} is zero")));
            }
            let mut out = hb.clone();
            out.scale(gamma / norm);
            Ok(out)
        })
        .collect()
}

/// Channel estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Zf,
    Ngd,
}

/// Estimator, optional TDMLE, then rescaling to `gamma`.
pub fn estimate_channel(
    estimator: Estimator,
    train: &ReceivedBits,
    pilots: &PilotSet,
    cfg: &SystemConfig,
    params: &ChestParams,
    sigma: f64,
) -> Result<Vec<CMat>> {
    let mut est = match estimator {
        Estimator::Zf => zf_chest(train, pilots, cfg)?,
        Estimator::Ngd => ngd_chest(train, pilots, cfg, params, sigma)?,
    };
    if params.denoise {
        denoise_all(&mut est, cfg)?;
    }
    normalize_channel(&est, params.gamma)
}

/// Applies TDMLE to every antenna.
pub fn denoise_all(est: &mut [CMat], cfg: &SystemConfig) -> Result<()> {
    let t = Tdmle::new(cfg)?;
    est.iter_mut().try_for_each(|h| t.denoise_antenna(h, cfg))
}

/// Mean over antennas of `||H_hat_b - H_b||^2 / ||H_b||^2`, both restricted
/// to the used subcarriers.
pub fn channel_mse(est: &[CMat], truth: &[CMat], cfg: &SystemConfig) -> Result<f64> {
    if est.len() != truth.len() || est.iter().zip(truth).any(|(a, b)| a.shape() != b.shape()) {
        return Err(Error::Dimension("estimate and channel shapes differ".into()));
    }
    let mut total = 0.0;
    for (e, t) in est.iter().zip(truth) {
        let (mut num, mut den) = (0.0, 0.0);
        for w in cfg.used_set() {
            for (a, b) in e.row(w).iter().zip(t.row(w)) {
                num += (a - b).norm_sqr();
                den += b.norm_sqr();
            }
        }
        if den == 0.0 {
            return Err(Error::Degenerate("true channel has no energy on the used band".into()));
        }
        total += num / den;
    }
    Ok(total / est.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{draw_channel, transmit_block, ChannelRealization};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> SystemConfig {
        SystemConfig {
            antennas: 6,
            users: 2,
            subcarriers: 16,
            used_subcarriers: 12,
            taps: 3,
            ..SystemConfig::default()
        }
    }

    fn training(
        cfg: &SystemConfig,
        seed: u64,
        n0: f64,
    ) -> (ChannelRealization, PilotSet, crate::airlink::Transmission) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(cfg, &mut rng).unwrap();
        let pilots = generate_pilots(cfg, &mut rng).unwrap();
        let tx = transmit_block(&pilots.frame_refs(), &ch.freq, n0, &mut rng).unwrap();
        (ch, pilots, tx)
    }

    #[test]
    fn pilots_are_qpsk_on_used_rows() {
        let cfg = SystemConfig {
            users: 8,
            antennas: 8,
            ..SystemConfig::default()
        };
        let p = generate_pilots(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(p.len(), 16);
        for t in &p.frames {
            for w in 0..cfg.subcarriers {
                for z in t.row(w) {
                    if cfg.is_used(w) {
                        assert!((z.norm_sqr() - cfg.symbol_energy).abs() < 1e-12);
                    } else {
                        assert_eq!(z.norm(), 0.0);
                    }
                }
            }
        }
        assert_eq!(p.per_subcarrier[20].row(3), p.frames[3].row(20));
    }

    #[test]
    fn zf_is_exact_without_noise_or_quantizer() {
        let cfg = small();
        let (ch, pilots, tx) = training(&cfg, 3, 0.0);
        let est = zf_chest(&tx.unquantized_as_observations(), &pilots, &cfg).unwrap();
        for (e, t) in est.iter().zip(ch.freq.per_antenna()) {
            for w in 0..cfg.subcarriers {
                for (a, b) in e.row(w).iter().zip(t.row(w)) {
                    if cfg.is_used(w) {
                        assert!((a - b).norm() < 1e-8);
                    } else {
                        assert_eq!(a.norm(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn single_user_zf_is_a_correlation() {
        let cfg = SystemConfig {
            users: 1,
            antennas: 2,
            ..small()
        };
        let (_, pilots, tx) = training(&cfg, 7, 0.3);
        let est = zf_chest(&tx.quantized, &pilots, &cfg).unwrap();
        let rt: Vec<Vec<Complex64>> = (0..pilots.len())
            .map(|n| crate::numerics::unitary_dft(&tx.quantized.per_antenna[1].column(n), false).unwrap())
            .collect();
        for w in cfg.used_set() {
            let num: Complex64 = (0..pilots.len()).map(|n| pilots.frames[n][(w, 0)].conj() * rt[n][w]).sum();
            let den: f64 = (0..pilots.len()).map(|n| pilots.frames[n][(w, 0)].norm_sqr()).sum();
            assert!((est[1][(w, 0)] - num / den).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_return_the_initialization() {
        let cfg = small();
        let (_, pilots, tx) = training(&cfg, 4, 0.5);
        let zf = zf_chest(&tx.quantized, &pilots, &cfg).unwrap();
        let params = ChestParams {
            iterations: 0,
            ..ChestParams::for_config(&cfg)
        };
        let ngd = ngd_chest(&tx.quantized, &pilots, &cfg, &params, 0.7).unwrap();
        assert_eq!(zf, ngd);
    }

    #[test]
    fn pilot_sets_have_full_rank() {
        let cfg = SystemConfig {
            users: 2,
            pilot_repetitions: 1,
            ..small()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let p = generate_pilots(&cfg, &mut rng).unwrap();
            for w in cfg.used_set() {
                assert!(Cholesky::new(&p.per_subcarrier[w].gram()).is_ok());
            }
        }
    }

    #[test]
    fn normalization_sets_the_norm() {
        let cfg = small();
        let (_, pilots, tx) = training(&cfg, 5, 0.5);
        let zf = zf_chest(&tx.quantized, &pilots, &cfg).unwrap();
        let n = normalize_channel(&zf, 3.5).unwrap();
        assert!(n.iter().all(|h| (h.frobenius() - 3.5).abs() < 1e-12));
        let again = normalize_channel(&n, 3.5).unwrap();
        for (a, b) in again.iter().zip(&n) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        assert!(matches!(
            normalize_channel(&[CMat::zeros(4, 2)], 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn singular_pilots_are_reported() {
        let cfg = small();
        let (_, mut pilots, tx) = training(&cfg, 6, 0.5);
        let w = cfg.first_used();
        for f in &mut pilots.frames {
            let v = f[(w, 0)];
            f[(w, 1)] = v;
        }
        let pilots = PilotSet::from_frames(pilots.frames).unwrap();
        assert!(matches!(zf_chest(&tx.quantized, &pilots, &cfg), Err(Error::Singular(_))));
    }
}
