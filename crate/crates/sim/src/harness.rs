//! Seeded Monte Carlo sweeps and their CSV export.
//!
//! Every trial draws from its own generator, derived from the master seed
//! and the (point, trial) indices. Outcomes are collected in index order and
//! summed sequentially, so results do not depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use onebit_core::airlink::transmit_block;
use onebit_core::airlink::{draw_channel, SystemConfig};
use onebit_core::chest::{channel_mse, estimate_channel, generate_pilots, ChestParams, Estimator};
use onebit_core::trial::{run_trial, trial_rng, Chain, TrialOutcome};
use rayon::prelude::*;

use crate::config::RunConfig;

/// Two-sided normal quantile of the 95% Wilson interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    Some((lo, hi))
}

/// Aggregate of one chain at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub chain: Chain,
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    /// Mean normalized channel MSE over the trials whose estimate succeeded.
    pub mse: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Trials in which the chain produced no decisions.
    pub failures: u64,
}

impl SweepRow {
    pub fn ber(&self) -> Option<f64> {
        (self.bits > 0).then(|| self.errors as f64 / self.bits as f64)
    }

    /// Wilson 95% interval of the BER.
    pub fn wilson(&self) -> Option<(f64, f64)> {
        wilson_interval(self.errors, self.bits, Z95)
    }

    /// Wilson interval at `z` standard deviations.
    pub fn wilson_at(&self, z: f64) -> Option<(f64, f64)> {
        wilson_interval(self.errors, self.bits, z)
    }
}

/// Fixed versus floating symbol disagreement at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    pub snr_db: f64,
    pub differ: u64,
    pub compared: u64,
}

impl Disagreement {
    pub fn rate(&self) -> f64 {
        if self.compared == 0 {
            0.0
        } else {
            self.differ as f64 / self.compared as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: RunConfig,
    /// Rows ordered by SNR point, then by chain as listed in the config.
    pub rows: Vec<SweepRow>,
    pub disagreement: Vec<Disagreement>,
    pub wall_time: Duration,
}

impl SweepResult {
    /// Rows of one chain in SNR order.
    pub fn curve(&self, chain: Chain) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.chain == chain).collect()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("cannot start worker pool")
}

fn trial_indices(run: &RunConfig) -> Vec<(usize, u64)> {
    (0..run.sweep.snr_db.len())
        .flat_map(|p| (0..run.sweep.trials).map(move |t| (p, t)))
        .collect()
}

/// Runs every chain of `run` over its SNR points on `workers` threads.
pub fn ber_sweep(run: &RunConfig, workers: usize) -> Result<SweepResult> {
    let start = Instant::now();
    let spec = run.trial_spec()?;
    let seed = run.system.seed;
    let indices = trial_indices(run);
    let outcomes: Vec<TrialOutcome> = pool(workers)?.install(|| {
        indices
            .par_iter()
            .map(|&(p, t)| {
                let mut rng = trial_rng(seed, p as u64, t);
                run_trial(&spec, run.sweep.snr_db[p], &mut rng)
            })
            .collect::<onebit_core::Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut disagreement = Vec::new();
    for (p, &snr_db) in run.sweep.snr_db.iter().enumerate() {
        let point: Vec<&TrialOutcome> = indices
            .iter()
            .zip(&outcomes)
            .filter(|((q, _), _)| *q == p)
            .map(|(_, o)| o)
            .collect();
        if point.is_empty() {
            continue;
        }
        for &chain in &spec.chains {
            let mut row = SweepRow {
                chain,
                snr_db,
                bits: 0,
                errors: 0,
                mse: None,
                trials: point.len() as u64,
                seed,
                failures: 0,
            };
            let mut mse_sum = 0.0;
            let mut mse_n = 0u64;
            for o in &point {
                let c = o.chains.iter().find(|c| c.chain == chain).expect("chain ran");
                row.bits += c.bits;
                row.errors += c.errors;
                row.failures += u64::from(c.failure.is_some());
                if c.mse.is_finite() {
                    mse_sum += c.mse;
                    mse_n += 1;
                }
            }
            row.mse = (mse_n > 0).then(|| mse_sum / mse_n as f64);
            rows.push(row);
        }
        let mut d = Disagreement {
            snr_db,
            differ: 0,
            compared: 0,
        };
        for (differ, compared) in point.iter().filter_map(|o| o.fixed_float) {
            d.differ += differ;
            d.compared += compared;
        }
        disagreement.push(d);
    }
    Ok(SweepResult {
        config: run.clone(),
        rows,
        disagreement,
        wall_time: start.elapsed(),
    })
}

/// Channel estimators compared by [`chest_mse_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseEstimator {
    /// ZF without denoising, rescaled to `gamma`.
    ZfRaw,
    ZfTdmle,
    NgdTdmle,
    /// The true channel.
    Perfect,
}

impl MseEstimator {
    pub const ALL: [MseEstimator; 4] = [
        MseEstimator::ZfRaw,
        MseEstimator::ZfTdmle,
        MseEstimator::NgdTdmle,
        MseEstimator::Perfect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MseEstimator::ZfRaw => "zf-raw",
            MseEstimator::ZfTdmle => "zf-tdmle",
            MseEstimator::NgdTdmle => "ngd-tdmle",
            MseEstimator::Perfect => "perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub estimator: MseEstimator,
    pub snr_db: f64,
    pub mean: f64,
    pub median: f64,
    pub trials: u64,
    pub seed: u64,
}

fn trial_mse(
    cfg: &SystemConfig,
    chest: &ChestParams,
    snr_db: f64,
    mut rng: impl rand::Rng,
) -> Result<[f64; 4]> {
    let n0 = cfg.noise_from_snr(snr_db);
    let channel = draw_channel(cfg, &mut rng)?;
    let pilots = generate_pilots(cfg, &mut rng)?;
    let train = transmit_block(&pilots.frame_refs(), &channel.freq, n0, &mut rng)?.quantized;
    let truth = channel.freq.per_antenna();
    let mut out = [0.0; 4];
    for (slot, est) in out.iter_mut().zip(MseEstimator::ALL) {
        let (estimator, denoise) = match est {
            MseEstimator::Perfect => continue,
            MseEstimator::ZfRaw => (Estimator::Zf, false),
            MseEstimator::ZfTdmle => (Estimator::Zf, chest.denoise),
            MseEstimator::NgdTdmle => (Estimator::Ngd, chest.denoise),
        };
        let params = ChestParams {
            denoise,
            ..chest.clone()
        };
        let h = estimate_channel(estimator, &train, &pilots, cfg, &params, n0.sqrt())?;
        *slot = channel_mse(&h, truth, cfg)?;
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Normalized channel-estimate MSE per estimator and SNR point. Trials use
/// the same generators, and hence the same realizations, as [`ber_sweep`].
pub fn chest_mse_sweep(run: &RunConfig, workers: usize) -> Result<Vec<MseRow>> {
    let spec = run.trial_spec()?;
    let seed = run.system.seed;
    let indices = trial_indices(run);
    let per_trial: Vec<[f64; 4]> = pool(workers)?.install(|| {
        indices
            .par_iter()
            .map(|&(p, t)| {
                let rng = trial_rng(seed, p as u64, t);
                trial_mse(&spec.cfg, &spec.chest, run.sweep.snr_db[p], rng)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (p, &snr_db) in run.sweep.snr_db.iter().enumerate() {
        for (i, estimator) in MseEstimator::ALL.into_iter().enumerate() {
            let mut vals: Vec<f64> = indices
                .iter()
                .zip(&per_trial)
                .filter(|((q, _), _)| *q == p)
                .map(|(_, m)| m[i])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            rows.push(MseRow {
                estimator,
                snr_db,
                mean,
                median: median(&mut vals),
                trials: vals.len() as u64,
                seed,
            });
        }
    }
    Ok(rows)
}

/// Header of the BER CSV.
pub const CSV_HEADER: [&str; 8] = ["chain", "snr_db", "bits", "errors", "ber", "mse", "trials", "seed"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// The BER table as CSV text.
pub fn results_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.chain.name().to_string(),
            r.snr_db.to_string(),
            r.bits.to_string(),
            r.errors.to_string(),
            opt(r.ber()),
            opt(r.mse),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Sidecar path next to a result file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

/// Writes the CSV to `path` and the run configuration to its sidecar.
pub fn export_results(result: &SweepResult, path: &Path) -> Result<()> {
    fs::write(path, results_csv(result)?).with_context(|| format!("cannot write {}", path.display()))?;
    let side = sidecar_path(path);
    fs::write(&side, result.config.to_toml()?).with_context(|| format!("cannot write {}", side.display()))?;
    Ok(())
}

/// Parses a BER CSV written by [`export_results`].
pub fn parse_results(text: &str) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    if rd.headers()?.iter().ne(CSV_HEADER) {
        bail!("unexpected CSV header");
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let mse = match f(5) {
            "" => None,
            s => Some(s.parse()?),
        };
        rows.push(SweepRow {
            chain: f(0).parse()?,
            snr_db: f(1).parse()?,
            bits: f(2).parse()?,
            errors: f(3).parse()?,
            mse,
            trials: f(6).parse()?,
            seed: f(7).parse()?,
            failures: 0,
        });
    }
    Ok(rows)
}

/// The MSE table as CSV text.
pub fn mse_csv(rows: &[MseRow]) -> Result<String> {
    let mut w = csv_writer(Vec::new());
    w.write_record(["estimator", "snr_db", "mse", "median", "trials", "seed"])?;
    for r in rows {
        w.write_record([
            r.estimator.name().to_string(),
            r.snr_db.to_string(),
            r.mean.to_string(),
            r.median.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// SNR at which `(snr, ber)` first falls to `target`, interpolating
/// linearly in `log10(ber)`. `None` if the curve never gets there.
pub fn crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    let lg = |b: f64| if b > 0.0 { b.log10() } else { f64::NEG_INFINITY };
    if let Some(&(s, b)) = points.first() {
        if b <= target {
            return Some(s);
        }
    }
    for pair in points.windows(2) {
        let ((s0, b0), (s1, b1)) = (pair[0], pair[1]);
        if b0 > target && b1 <= target {
            let (l0, l1) = (lg(b0), lg(b1));
            if !l1.is_finite() {
                return Some(s1);
            }
            return Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}
