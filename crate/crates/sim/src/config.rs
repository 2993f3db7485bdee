//! Run configuration: the TOML schema, `--set` overrides and conversion into
//! the solver parameters of `onebit-core`.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use onebit_core::airlink::SystemConfig;
use onebit_core::chest::ChestParams;
use onebit_core::detect::{DetectorParams, FixedPointPlan, FIXED_STEP, FLOAT_STEP, SIGNAL_NAMES};
use onebit_core::numerics::{ClampedMillsTable, FixedPointFormat, MillsRatio};
use onebit_core::trial::{Chain, TrialSpec};
use serde::{Deserialize, Serialize};

/// Inverse Mills ratio evaluation selectable from the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MillsChoice {
    #[default]
    Exact,
    /// The lookup table described by `[fixed_point]`.
    Clamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub iterations: usize,
    pub kappa: f64,
    /// Floor `sigma` at the noise level of `sigma_floor_snr_db`.
    pub sigma_floor: bool,
    pub sigma_floor_snr_db: f64,
    pub mills: MillsChoice,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            iterations: 3,
            kappa: FLOAT_STEP,
            sigma_floor: true,
            sigma_floor_snr_db: onebit_core::detect::SIGMA_FLOOR_SNR_DB,
            mills: MillsChoice::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSection {
    pub kappa: f64,
    #[serde(rename = "H")]
    pub h: String,
    pub z: String,
    pub alpha: String,
    #[serde(rename = "V")]
    pub v: String,
    #[serde(rename = "G")]
    pub g: String,
    #[serde(rename = "S")]
    pub s: String,
    pub inv_sigma: String,
    /// Lower threshold of the lookup table.
    pub t_n: f64,
    /// Upper threshold of the lookup table.
    pub t_p: f64,
    /// Format of the table entries.
    pub lut: String,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let plan = FixedPointPlan::hardware();
        let f = |name: &str| plan.format(name).expect("known signal").to_string();
        Self {
            kappa: FIXED_STEP,
            h: f("H"),
            z: f("z"),
            alpha: f("alpha"),
            v: f("V"),
            g: f("G"),
            s: f("S"),
            inv_sigma: f("inv_sigma"),
            t_n: plan.table.t_n(),
            t_p: plan.table.t_p(),
            lut: plan.table.value_format().to_string(),
        }
    }
}

impl FixedPointSection {
    fn signal(&self, name: &str) -> &str {
        match name {
            "H" => &self.h,
            "z" => &self.z,
            "alpha" => &self.alpha,
            "V" => &self.v,
            "G" => &self.g,
            "S" => &self.s,
            _ => &self.inv_sigma,
        }
    }

    pub fn table(&self) -> Result<ClampedMillsTable> {
        let fmt: FixedPointFormat = self.lut.parse().context("fixed_point.lut")?;
        Ok(ClampedMillsTable::new(self.t_n, self.t_p, fmt)?)
    }

    pub fn plan(&self) -> Result<FixedPointPlan> {
        let mut plan = FixedPointPlan::hardware();
        for name in SIGNAL_NAMES {
            let fmt: FixedPointFormat = self
                .signal(name)
                .parse()
                .with_context(|| format!("fixed_point.{name}"))?;
            plan.set_format(name, fmt)?;
        }
        plan.table = self.table()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChestSection {
    pub iterations: usize,
    pub step: f64,
    pub denoise: bool,
    /// Target per-antenna norm; absent uses the analytic channel gain.
    pub gamma: Option<f64>,
    pub mills: MillsChoice,
}

impl Default for ChestSection {
    fn default() -> Self {
        Self {
            iterations: 5,
            step: 1.0 / 16.0,
            denoise: true,
            gamma: None,
            mills: MillsChoice::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    /// Channel realizations per SNR point.
    pub trials: u64,
    pub chains: Vec<Chain>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: (0..=10).map(|i| -10.0 + 2.5 * f64::from(i)).collect(),
            trials: 200,
            chains: Chain::ALL.to_vec(),
        }
    }
}

/// Everything needed to reproduce a run. `system.seed` is the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub detector: DetectorSection,
    pub fixed_point: FixedPointSection,
    pub chest: ChestSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig {
                antennas: 64,
                users: 4,
                ..SystemConfig::default()
            },
            detector: DetectorSection::default(),
            fixed_point: FixedPointSection::default(),
            chest: ChestSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Keys accepted by the config file and by `--set`, with a short meaning.
pub const KEYS: &[(&str, &str)] = &[
    ("system.antennas", "base-station antennas B"),
    ("system.users", "single-antenna users U"),
    ("system.subcarriers", "OFDM subcarriers W (power of two)"),
    ("system.used_subcarriers", "subcarriers carrying pilots and data"),
    ("system.taps", "channel taps L"),
    ("system.cyclic_prefix", "cyclic prefix P >= L - 1"),
    ("system.pilot_repetitions", "training symbols per user T"),
    ("system.data_symbols", "data OFDM symbols per realization"),
    ("system.symbol_energy", "average symbol energy E_s"),
    ("system.channel_energy", "average channel energy E_h"),
    ("system.constellation", "qpsk | 8psk | 16qam"),
    ("system.seed", "master seed"),
    ("detector.iterations", "1BOX iterations K"),
    ("detector.kappa", "floating-point step size"),
    ("detector.sigma_floor", "floor sigma at a fixed noise level"),
    ("detector.sigma_floor_snr_db", "SNR whose noise level is the floor"),
    ("detector.mills", "exact | clamped"),
    ("fixed_point.kappa", "fixed-point step size"),
    ("fixed_point.H", "channel format, e.g. \"[4.4]\""),
    ("fixed_point.z", "matched-product format"),
    ("fixed_point.alpha", "scaled-sample format"),
    ("fixed_point.V", "transformed-residual format"),
    ("fixed_point.G", "stored-update format"),
    ("fixed_point.S", "iterate format"),
    ("fixed_point.inv_sigma", "format of 1/sigma"),
    ("fixed_point.t_n", "lower lookup-table threshold"),
    ("fixed_point.t_p", "upper lookup-table threshold"),
    ("fixed_point.lut", "lookup-table entry format"),
    ("chest.iterations", "NGD iterations (0 keeps the ZF estimate)"),
    ("chest.step", "normalized NGD step"),
    ("chest.denoise", "apply time-domain denoising"),
    ("chest.gamma", "per-antenna channel norm (omit for the analytic gain)"),
    ("chest.mills", "exact | clamped"),
    ("sweep.snr_db", "SNR points in dB, e.g. [0, 5, 10]"),
    ("sweep.trials", "channel realizations per SNR point"),
    ("sweep.chains", "zf-zf, zf-zf-infinite, zf-onebox, ngd-onebox, perfect-onebox, ngd-onebox-fixed"),
];

/// Text for `--help` listing every key.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML sections, or dotted with --set):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<width$}  {d}\n"));
    }
    s
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Applies one `key=value` override. The value is read as a TOML value
    /// and, if that does not type-check, as a bare string. Cross-field
    /// invariants are left to [`RunConfig::check`], so overrides may pass
    /// through inconsistent intermediate states.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
        let key = key.trim();
        let raw = raw.trim();
        if !KEYS.iter().any(|(k, _)| *k == key) {
            bail!("unknown config key `{key}`");
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"));
        let mut first_err = None;
        for value in parsed.into_iter().chain([toml::Value::String(raw.to_string())]) {
            match self.with_value(key, value) {
                Ok(next) => {
                    *self = next;
                    return Ok(());
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.expect("at least one attempt").context(format!("bad value for `{key}`")))
    }

    fn with_value(&self, key: &str, value: toml::Value) -> Result<Self> {
        let mut table = toml::Table::try_from(self)?;
        let (section, field) = key.split_once('.').expect("keys are dotted");
        table
            .get_mut(section)
            .and_then(|s| s.as_table_mut())
            .ok_or_else(|| anyhow!("missing section {section}"))?
            .insert(field.to_string(), value);
        let next: Self = table.try_into()?;
        next.fixed_point.plan()?;
        Ok(next)
    }

    /// Validates everything that can be checked without running.
    pub fn check(&self) -> Result<()> {
        self.trial_spec()?;
        if self.sweep.snr_db.iter().any(|x| !x.is_finite()) {
            bail!("sweep.snr_db must be finite");
        }
        Ok(())
    }

    fn mills(&self, choice: MillsChoice) -> Result<MillsRatio> {
        Ok(match choice {
            MillsChoice::Exact => MillsRatio::Exact,
            MillsChoice::Clamped => MillsRatio::Clamped(self.fixed_point.table()?),
        })
    }

    pub fn detector_params(&self) -> Result<DetectorParams> {
        let cfg = &self.system;
        Ok(DetectorParams {
            iterations: self.detector.iterations,
            kappa: self.detector.kappa,
            sigma_floor: self
                .detector
                .sigma_floor
                .then(|| cfg.noise_std(self.detector.sigma_floor_snr_db)),
            mills: self.mills(self.detector.mills)?,
            fixed_point: None,
        })
    }

    pub fn fixed_detector_params(&self) -> Result<DetectorParams> {
        Ok(DetectorParams {
            kappa: self.fixed_point.kappa,
            fixed_point: Some(self.fixed_point.plan()?),
            ..self.detector_params()?
        })
    }

    pub fn chest_params(&self) -> Result<ChestParams> {
        Ok(ChestParams {
            iterations: self.chest.iterations,
            step: self.chest.step,
            denoise: self.chest.denoise,
            gamma: self.chest.gamma.unwrap_or_else(|| self.system.channel_gain()),
            mills: self.mills(self.chest.mills)?,
        })
    }

    pub fn trial_spec(&self) -> Result<TrialSpec> {
        let spec = TrialSpec {
            cfg: self.system.clone(),
            chains: self.sweep.chains.clone(),
            detector: self.detector_params()?,
            fixed_detector: self.fixed_detector_params()?,
            chest: self.chest_params()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}
