use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use onebit_core::airlink::{draw_channel, modulate, transmit, transmit_block, FreqChannel};
use onebit_core::chest::{estimate_channel, generate_pilots, Estimator};
use onebit_core::detect::{count_multiplications, objective, onebox_detect_observed};
use onebit_core::trial::trial_rng;
use onebit_sim::config::{keys_help, RunConfig};
use onebit_sim::fixtures::dump_fixtures;
use onebit_sim::harness::{ber_sweep, chest_mse_sweep, export_results, mse_csv, results_csv};
use rand::Rng;

/// Link-level simulator for 1-bit massive MU-MIMO-OFDM uplinks.
#[derive(Parser)]
#[command(name = "onebit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to absent keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set system.antennas=128` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file (or directory for dump-fixtures).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed, replacing system.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct Point {
    /// SNR in dB.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    snr: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Bit error rates of every configured chain over the SNR sweep.
    #[command(after_help = keys_help())]
    Sweep(Common),
    /// Channel-estimate MSE per estimator over the SNR sweep.
    #[command(name = "chest-mse", after_help = keys_help())]
    ChestMse(Common),
    /// One seeded trial of the floating detector, printing the objective
    /// after every iteration.
    #[command(name = "detect-once", after_help = keys_help())]
    DetectOnce {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        /// Trial index whose generator is used.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Use the NGD estimate instead of the true channel.
        #[arg(long)]
        estimated: bool,
    },
    /// Hex dumps of the fixed-point detector signals of one trial.
    #[command(name = "dump-fixtures", after_help = keys_help())]
    DumpFixtures {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
    },
    /// Real multiplications of the detector for the configured system.
    #[command(after_help = keys_help())]
    Complexity(Common),
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut run = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &c.overrides {
        run.apply_override(o)?;
    }
    if let Some(seed) = c.seed {
        run.system.seed = seed;
    }
    run.check()?;
    Ok(run)
}

/// `1234567` as `1,234,567`.
fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn detect_once(run: &RunConfig, snr_db: f64, trial: u64, estimated: bool) -> Result<()> {
    let spec = run.trial_spec()?;
    let cfg = &spec.cfg;
    let n0 = cfg.noise_from_snr(snr_db);
    let sigma = n0.sqrt();
    let mut rng = trial_rng(cfg.seed, 0, trial);
    let channel = draw_channel(cfg, &mut rng)?;
    let pilots = generate_pilots(cfg, &mut rng)?;
    let train = transmit_block(&pilots.frame_refs(), &channel.freq, n0, &mut rng)?.quantized;
    let chan = if estimated {
        let h = estimate_channel(Estimator::Ngd, &train, &pilots, cfg, &spec.chest, sigma)?;
        FreqChannel::from_per_antenna(h)?
    } else {
        channel.freq.clone()
    };
    let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect();
    let frame = modulate(&payload, cfg)?;
    let bits = transmit(&frame, &channel.freq, n0, &mut rng)?.quantized;
    let sigma_eff = spec.detector.effective_sigma(sigma);
    let start = onebit_core::linalg::CMat::zeros(cfg.subcarriers, cfg.users);
    println!("iteration 0 objective {}", objective(&start, &chan, &bits, sigma_eff)?);
    let mut failure = None;
    let det = onebox_detect_observed(&bits, &chan, sigma, cfg, &spec.detector, &mut |k, s| {
        match objective(s, &chan, &bits, sigma_eff) {
            Ok(f) => println!("iteration {k} objective {f}"),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    let errors = det.hard_bits.iter().zip(&payload).filter(|(a, b)| a != b).count();
    println!("bit errors {errors} of {}", payload.len());
    Ok(())
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(c) => {
            let run = load(&c)?;
            let res = ber_sweep(&run, c.workers)?;
            match &c.out {
                Some(p) => export_results(&res, p)?,
                None => print!("{}", results_csv(&res)?),
            }
            eprintln!("sweep finished in {:.1} s", res.wall_time.as_secs_f64());
        }
        Command::ChestMse(c) => {
            let run = load(&c)?;
            let rows = chest_mse_sweep(&run, c.workers)?;
            write_or_print(c.out.as_ref(), &mse_csv(&rows)?)?;
        }
        Command::DetectOnce {
            common,
            point,
            trial,
            estimated,
        } => detect_once(&load(&common)?, point.snr, trial, estimated)?,
        Command::DumpFixtures { common, point } => {
            let run = load(&common)?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("fixtures"));
            let files = dump_fixtures(&run, point.snr, &dir)?;
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        Command::Complexity(c) => {
            let run = load(&c)?;
            let n = count_multiplications(&run.system, run.detector.iterations as u64);
            println!("{}", thousands(n));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("onebit: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
