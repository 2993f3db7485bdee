use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{finish, DetectionResult};
use crate::airlink::{FreqChannel, ReceivedBits, SystemConfig};
use crate::linalg::{CMat, NormalEquations};
use crate::numerics::DftPlan;
use crate::{Error, Result};

/// Zero-forcing detector with the per-subcarrier factorizations of one
/// channel estimate, reusable across OFDM symbols.
pub struct ZfDetector {
    cfg: SystemConfig,
    plan: DftPlan,
    /// `None` for subcarriers whose Gram matrix is singular.
    solvers: Vec<Option<NormalEquations>>,
}

impl ZfDetector {
    pub fn new(chan: &FreqChannel, cfg: &SystemConfig) -> Result<Self> {
        chan.check_against(cfg)?;
        let solvers = cfg
            .used_set()
            .map(|w| NormalEquations::new(chan.per_subcarrier()[w].clone()).ok())
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            plan: DftPlan::new(cfg.subcarriers)?,
            solvers,
        })
    }

    /// Detects one OFDM symbol from 1-bit or unquantized samples.
    ///
    /// Subcarriers with a rank-deficient channel are left at zero and
    /// listed in [`DetectionResult::erased`].
    pub fn detect(&self, obs: &ReceivedBits) -> Result<DetectionResult> {
        let cfg = &self.cfg;
        if obs.antennas() != cfg.antennas
            || obs.per_antenna.iter().any(|r| r.shape() != (cfg.subcarriers, 1))
        {
            return Err(Error::Dimension(format!(
                "expected one {}-sample symbol on each of {} antennas",
                cfg.subcarriers, cfg.antennas
            )));
        }
        // column b holds F r_b
        let mut freq = CMat::zeros(cfg.subcarriers, cfg.antennas);
        let mut buf = Vec::with_capacity(cfg.subcarriers);
        for (b, r) in obs.per_antenna.iter().enumerate() {
            buf.clear();
            buf.extend_from_slice(r.as_slice());
            self.plan.forward(&mut buf);
            for (w, x) in buf.iter().enumerate() {
                freq[(w, b)] = *x;
            }
        }
        let mut s = CMat::zeros(cfg.subcarriers, cfg.users);
        let mut erased = Vec::new();
        for (w, solver) in cfg.used_set().zip(&self.solvers) {
            match solver {
                Some(ne) => {
                    let x = ne.solve(freq.row(w));
                    s.row_mut(w).copy_from_slice(&x);
                }
                None => {
                    erased.push(w);
                    s.row_mut(w).fill(Complex64::new(0.0, 0.0));
                }
            }
        }
        Ok(finish(s, cfg, 1, erased))
    }
}

/// Per-subcarrier least squares `(H_w^H H_w)^-1 H_w^H (F r)_w` followed by
/// normalization and slicing.
pub fn zf_detect(obs: &ReceivedBits, chan: &FreqChannel, cfg: &SystemConfig) -> Result<DetectionResult> {
    ZfDetector::new(chan, cfg)?.detect(obs)
}
