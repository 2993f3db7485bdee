//! Golden vectors of the fixed-point detector for hardware cross-checks.
//!
//! One file per signal per iteration. Each line holds one complex entry as
//! two hex words, real then imaginary, in two's complement at the signal's
//! format. Digits are written most significant first, so bit 0 (the LSB) is
//! the last bit of the last digit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use onebit_core::airlink::{draw_channel, modulate, transmit, transmit_block, FreqChannel};
use onebit_core::chest::{estimate_channel, generate_pilots, Estimator};
use onebit_core::detect::onebox_detect_fixed_traced;
use onebit_core::linalg::CMat;
use onebit_core::numerics::FixedPointFormat;
use onebit_core::trial::trial_rng;
use rand::Rng;

use crate::config::RunConfig;

/// Formats one word of `fmt` as fixed-width hex.
pub fn hex_word(x: f64, fmt: FixedPointFormat) -> String {
    let digits = fmt.word_bits().div_ceil(4) as usize;
    format!("{:0digits$x}", fmt.word_pattern(fmt.to_word(x)))
}

/// Inverse of [`hex_word`].
pub fn parse_hex_word(s: &str, fmt: FixedPointFormat) -> Result<f64> {
    let raw = u64::from_str_radix(s, 16).with_context(|| format!("bad hex word {s:?}"))?;
    let bits = fmt.word_bits();
    let word = ((raw << (64 - bits)) as i64) >> (64 - bits);
    Ok(fmt.from_word(word))
}

struct Dump {
    text: String,
}

impl Dump {
    fn new(signal: &str, fmt: FixedPointFormat, layout: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# signal {signal}");
        let _ = writeln!(
            text,
            "# format {fmt}: {} bits two's complement, {} fractional",
            fmt.word_bits(),
            fmt.fractional_bits()
        );
        let _ = writeln!(text, "# layout {layout}");
        let _ = writeln!(text, "# entry: real imag; hex, most significant digit first, bit 0 = LSB");
        Self { text }
    }

    fn matrix(&mut self, m: &CMat, fmt: FixedPointFormat) {
        for row in 0..m.rows() {
            for z in m.row(row) {
                self.entry(*z, fmt);
            }
        }
    }

    fn entry(&mut self, z: Complex64, fmt: FixedPointFormat) {
        let _ = writeln!(self.text, "{} {}", hex_word(z.re, fmt), hex_word(z.im, fmt));
    }

    fn write(self, dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, self.text).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
        Ok(())
    }
}

/// Runs trial 0 of `run` at `snr_db` with the NGD estimate and writes the
/// fixed-point signals of every iteration into `dir`. Returns the files.
pub fn dump_fixtures(run: &RunConfig, snr_db: f64, dir: &Path) -> Result<Vec<PathBuf>> {
    let spec = run.trial_spec()?;
    let cfg = &spec.cfg;
    let params = &spec.fixed_detector;
    let plan = params.fixed_point.clone().expect("fixed detector has a plan");
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let mut rng = trial_rng(cfg.seed, 0, 0);
    let n0 = cfg.noise_from_snr(snr_db);
    let sigma = n0.sqrt();
    let channel = draw_channel(cfg, &mut rng)?;
    let pilots = generate_pilots(cfg, &mut rng)?;
    let train = transmit_block(&pilots.frame_refs(), &channel.freq, n0, &mut rng)?.quantized;
    let est = estimate_channel(Estimator::Ngd, &train, &pilots, cfg, &spec.chest, sigma)?;
    let est = FreqChannel::from_per_antenna(est)?;
    let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect();
    let frame = modulate(&payload, cfg)?;
    let bits = transmit(&frame, &channel.freq, n0, &mut rng)?.quantized;

    let mut written = Vec::new();
    let sign = FixedPointFormat::q(1, 0);
    let mut r = Dump::new("r", sign, "antenna-major, then subcarrier; +1 = 0, -1 = 1");
    for rb in &bits.per_antenna {
        for w in 0..rb.rows() {
            let s = rb[(w, 0)];
            r.entry(Complex64::new(s.re.min(0.0), s.im.min(0.0)), sign);
        }
    }
    r.write(dir, "r.hex", &mut written)?;

    let mut result = Ok(());
    onebox_detect_fixed_traced(&bits, &est, sigma, cfg, params, &mut |it| {
        if result.is_err() {
            return;
        }
        result = (|| -> Result<()> {
            let k = it.iteration;
            if k == 1 {
                let mut h = Dump::new("H", plan.h, "antenna-major, then subcarrier, then user");
                for hb in it.h {
                    h.matrix(hb, plan.h);
                }
                h.write(dir, "H.hex", &mut written)?;
                let mut inv = Dump::new("inv_sigma", plan.inv_sigma, "single real word, imaginary part zero");
                inv.entry(Complex64::new(it.inv_sigma, 0.0), plan.inv_sigma);
                inv.write(dir, "inv_sigma.hex", &mut written)?;
            }
            let per_antenna = "subcarrier-major, then antenna";
            for (name, m, fmt) in [("z", it.z, plan.z), ("alpha", it.alpha, plan.alpha), ("V", it.v, plan.v)] {
                let mut d = Dump::new(&format!("{name} iteration {k}"), fmt, per_antenna);
                d.matrix(m, fmt);
                d.write(dir, &format!("{name}_it{k}.hex"), &mut written)?;
            }
            for (name, m, fmt) in [("G", it.g, plan.g), ("S", it.s, plan.s)] {
                let layout = if name == "G" {
                    "subcarrier-major, then user; holds the scaled update kappa*G"
                } else {
                    "subcarrier-major, then user"
                };
                let mut d = Dump::new(&format!("{name} iteration {k}"), fmt, layout);
                d.matrix(m, fmt);
                d.write(dir, &format!("{name}_it{k}.hex"), &mut written)?;
            }
            Ok(())
        })();
    })?;
    result?;
    Ok(written)
}
