//! One Monte Carlo trial of a coherence block, evaluated by every receiver
//! chain on the same realization.
//!
//! A trial draws, in this order: the channel, the pilots, the training
//! noise, then for each data symbol its payload and noise. Every chain sees
//! exactly these draws, so chain-to-chain differences within a trial are due
//! to the receivers alone.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airlink::{draw_channel, modulate, transmit, transmit_block, FreqChannel, ReceivedBits, SystemConfig};
use crate::chest::{channel_mse, denoise_all, estimate_channel, generate_pilots, zf_chest, ChestParams, Estimator};
use crate::detect::{onebox_detect, DetectionResult, DetectorParams, ZfDetector};
use crate::linalg::CMat;
use crate::{Error, Result};

/// Receiver chains compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chain {
    /// ZF channel estimate and ZF detection on 1-bit samples.
    ZfZf,
    /// ZF estimate and detection on unquantized samples.
    ZfZfInfinite,
    ZfOnebox,
    NgdOnebox,
    PerfectOnebox,
    /// NGD estimate with the fixed-point detector.
    NgdOneboxFixed,
}

impl Chain {
    pub const ALL: [Chain; 6] = [
        Chain::ZfZf,
        Chain::ZfZfInfinite,
        Chain::ZfOnebox,
        Chain::NgdOnebox,
        Chain::PerfectOnebox,
        Chain::NgdOneboxFixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Chain::ZfZf => "zf-zf",
            Chain::ZfZfInfinite => "zf-zf-infinite",
            Chain::ZfOnebox => "zf-onebox",
            Chain::NgdOnebox => "ngd-onebox",
            Chain::PerfectOnebox => "perfect-onebox",
            Chain::NgdOneboxFixed => "ngd-onebox-fixed",
        }
    }

    fn estimate(self) -> Csi {
        match self {
            Chain::ZfZf | Chain::ZfOnebox => Csi::Zf,
            Chain::ZfZfInfinite => Csi::ZfInfinite,
            Chain::NgdOnebox | Chain::NgdOneboxFixed => Csi::Ngd,
            Chain::PerfectOnebox => Csi::Perfect,
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Chain::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown chain {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Csi {
    Zf,
    ZfInfinite,
    Ngd,
    Perfect,
}

/// Everything a trial needs besides the SNR and the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub cfg: SystemConfig,
    pub chains: Vec<Chain>,
    pub detector: DetectorParams,
    pub fixed_detector: DetectorParams,
    pub chest: ChestParams,
}

impl TrialSpec {
    /// All chains with default parameters for `cfg`.
    pub fn new(cfg: SystemConfig) -> Self {
        Self {
            chains: Chain::ALL.to_vec(),
            detector: DetectorParams::floating(&cfg),
            fixed_detector: DetectorParams::fixed(&cfg),
            chest: ChestParams::for_config(&cfg),
            cfg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.detector.validate()?;
        self.fixed_detector.validate()?;
        self.chest.validate()?;
        if self.detector.fixed_point.is_some() {
            return Err(Error::Config("the floating detector must not carry a fixed-point plan".into()));
        }
        if self.fixed_detector.fixed_point.is_none() {
            return Err(Error::Config("the fixed-point detector needs a fixed-point plan".into()));
        }
        Ok(())
    }
}

/// Per-chain counts of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub chain: Chain,
    pub bits: u64,
    pub errors: u64,
    /// Normalized channel-estimate MSE of the chain's CSI.
    pub mse: f64,
    /// Why the chain produced no decisions, if it failed.
    pub failure: Option<String>,
}

/// Result of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub chains: Vec<ChainOutcome>,
    /// Symbols decided differently by the fixed-point and floating NGD
    /// chains, and symbols compared; present when both chains ran.
    pub fixed_float: Option<(u64, u64)>,
}

/// Generator of trial `trial` at SNR point `point`.
///
/// The three indices are mixed with SplitMix64 so neighbouring trials get
/// unrelated streams.
pub fn trial_rng(master_seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut x = master_seed;
    for v in [point, trial] {
        x = splitmix(x ^ splitmix(v.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    ChaCha8Rng::seed_from_u64(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Link {
    train: ReceivedBits,
    train_inf: ReceivedBits,
    data: Vec<(Vec<u8>, ReceivedBits, ReceivedBits)>,
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn estimate(
    csi: Csi,
    spec: &TrialSpec,
    link: &Link,
    pilots: &crate::chest::PilotSet,
    truth: &FreqChannel,
    sigma: f64,
) -> Result<Vec<CMat>> {
    let cfg = &spec.cfg;
    match csi {
        Csi::Perfect => Ok(truth.per_antenna().to_vec()),
        Csi::Zf => estimate_channel(Estimator::Zf, &link.train, pilots, cfg, &spec.chest, sigma),
        Csi::Ngd => estimate_channel(Estimator::Ngd, &link.train, pilots, cfg, &spec.chest, sigma),
        Csi::ZfInfinite => {
            let mut h = zf_chest(&link.train_inf, pilots, cfg)?;
            if spec.chest.denoise {
                denoise_all(&mut h, cfg)?;
            }
            Ok(h)
        }
    }
}

/// Runs every chain of `spec` on one realization drawn from `rng`.
pub fn run_trial<R: Rng + ?Sized>(spec: &TrialSpec, snr_db: f64, rng: &mut R) -> Result<TrialOutcome> {
    spec.validate()?;
    let cfg = &spec.cfg;
    let n0 = cfg.noise_from_snr(snr_db);
    let sigma = libm::sqrt(n0);

    let channel = draw_channel(cfg, rng)?;
    let pilots = generate_pilots(cfg, rng)?;
    let training = transmit_block(&pilots.frame_refs(), &channel.freq, n0, rng)?;
    let mut data = Vec::with_capacity(cfg.data_symbols);
    for _ in 0..cfg.data_symbols {
        let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect();
        let frame = modulate(&payload, cfg)?;
        let tx = transmit(&frame, &channel.freq, n0, rng)?;
        let inf = tx.unquantized_as_observations();
        data.push((payload, tx.quantized, inf));
    }
    let link = Link {
        train_inf: training.unquantized_as_observations(),
        train: training.quantized,
        data,
    };

    // estimates are shared between chains using the same CSI
    let mut cache: Vec<(Csi, Result<(FreqChannel, f64)>)> = Vec::new();
    let mut decisions: Vec<(Chain, Vec<u8>)> = Vec::new();
    let mut chains = Vec::with_capacity(spec.chains.len());
    for &chain in &spec.chains {
        let csi = chain.estimate();
        if !cache.iter().any(|(c, _)| *c == csi) {
            let est = estimate(csi, spec, &link, &pilots, &channel.freq, sigma).and_then(|h| {
                let mse = channel_mse(&h, channel.freq.per_antenna(), cfg)?;
                Ok((FreqChannel::from_per_antenna(h)?, mse))
            });
            cache.push((csi, est));
        }
        let est = &cache.iter().find(|(c, _)| *c == csi).expect("cached above").1;
        let outcome = match est {
            Err(e) => ChainOutcome {
                chain,
                bits: 0,
                errors: 0,
                mse: f64::NAN,
                failure: Some(alloc::format!("{e}")),
            },
            Ok((h, mse)) => match detect_all(chain, spec, &link, h, sigma) {
                Ok(bits) => {
                    let mut errors = 0;
                    let mut total = 0;
                    for (d, (payload, _, _)) in bits.iter().zip(&link.data) {
                        errors += count_errors(d, payload);
                        total += payload.len() as u64;
                    }
                    decisions.push((chain, bits.concat()));
                    ChainOutcome {
                        chain,
                        bits: total,
                        errors,
                        mse: *mse,
                        failure: None,
                    }
                }
                Err(e) => ChainOutcome {
                    chain,
                    bits: 0,
                    errors: 0,
                    mse: *mse,
                    failure: Some(alloc::format!("{e}")),
                },
            },
        };
        chains.push(outcome);
    }

    let find = |c: Chain| decisions.iter().find(|(x, _)| *x == c).map(|(_, d)| d);
    let fixed_float = match (find(Chain::NgdOnebox), find(Chain::NgdOneboxFixed)) {
        (Some(a), Some(b)) => {
            let bps = cfg.constellation().bits_per_symbol();
            let differ = a.chunks(bps).zip(b.chunks(bps)).filter(|(x, y)| x != y).count();
            Some((differ as u64, (a.len() / bps) as u64))
        }
        _ => None,
    };
    Ok(TrialOutcome { chains, fixed_float })
}

fn detect_all(chain: Chain, spec: &TrialSpec, link: &Link, h: &FreqChannel, sigma: f64) -> Result<Vec<Vec<u8>>> {
    let cfg = &spec.cfg;
    let bits = |r: Result<DetectionResult>| r.map(|d| d.hard_bits);
    match chain {
        Chain::ZfZf | Chain::ZfZfInfinite => {
            let zf = ZfDetector::new(h, cfg)?;
            link.data
                .iter()
                .map(|(_, q, inf)| bits(zf.detect(if chain == Chain::ZfZf { q } else { inf })))
                .collect()
        }
        Chain::NgdOneboxFixed => link
            .data
            .iter()
            .map(|(_, q, _)| bits(onebox_detect(q, h, sigma, cfg, &spec.fixed_detector)))
            .collect(),
        _ => link
            .data
            .iter()
            .map(|(_, q, _)| bits(onebox_detect(q, h, sigma, cfg, &spec.detector)))
            .collect(),
    }
}
