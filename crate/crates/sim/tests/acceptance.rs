//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! The Monte Carlo tests are serialized through a lock so their runtimes
//! are measured on an otherwise idle machine, and the two long sweeps are
//! shared between the tests that read them.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use onebit_core::airlink::{
    draw_channel, modulate, transmit, ConstellationKind, FreqChannel, ReceivedBits, SystemConfig,
};
use onebit_core::chest::Tdmle;
use onebit_core::detect::{count_multiplications, gradient, objective, onebox_detect_observed, DetectorParams};
use onebit_core::linalg::CMat;
use onebit_core::numerics::MillsRatio;
use onebit_core::trial::{trial_rng, Chain};
use onebit_sim::config::RunConfig;
use onebit_sim::harness::{ber_sweep, crossing, results_csv, SweepResult, SweepRow};
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes past the test harness's output capture so the lines appear in
/// every run.
fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    say(&format!("[{tag}] criterion {id}: {name}: {detail}"));
}

fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    // Box-Muller, unit variance per complex entry
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * PI * u2)
}

fn random_sign<R: Rng>(rng: &mut R) -> Complex64 {
    let s = |b: bool| if b { 1.0 } else { -1.0 };
    Complex64::new(s(rng.random()), s(rng.random()))
}

#[test]
fn criterion_1_gradient_matches_finite_differences() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = trial_rng(101, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let b = rng.random_range(1..=8);
        let u = rng.random_range(1..=2);
        let w = 8;
        let sigma = rng.random_range(0.3..2.0);
        let chan = FreqChannel::from_per_antenna(
            (0..b).map(|_| CMat::from_fn(w, u, |_, _| cn(&mut rng))).collect(),
        )
        .unwrap();
        let bits = ReceivedBits {
            per_antenna: (0..b).map(|_| CMat::from_fn(w, 1, |_, _| random_sign(&mut rng))).collect(),
        };
        let s = CMat::from_fn(w, u, |_, _| cn(&mut rng) * 0.5);
        let (g, pre) = gradient(&s, &chan, &bits, sigma, &MillsRatio::Exact).unwrap();
        let f = |m: &CMat| objective(m, &chan, &bits, sigma).unwrap();
        let h = 1e-5;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..w {
            for j in 0..u {
                let mut partial = [0.0; 2];
                for (k, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                    let mut p = s.clone();
                    let mut m = s.clone();
                    p.row_mut(i)[j] += dir * h;
                    m.row_mut(i)[j] -= dir * h;
                    partial[k] = (f(&p) - f(&m)) / (2.0 * h);
                }
                // -df/dconj(S) = -(df/dRe + j df/dIm) / 2
                let fd = -Complex64::new(partial[0], partial[1]) / 2.0;
                let an = g.row(i)[j] * pre;
                num = num.max((fd - an).norm());
                den = den.max(an.norm());
            }
        }
        worst = worst.max(num / den);
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-6 && elapsed < Duration::from_secs(10);
    report(1, "gradient oracle", ok, &format!("max relative error {worst:.2e} in {elapsed:.2?}"));
    assert!(ok);
}

#[test]
fn criterion_2_objective_descends() {
    let _g = serial();
    let start = Instant::now();
    let cfg = SystemConfig {
        antennas: 64,
        users: 4,
        ..SystemConfig::default()
    };
    let params = DetectorParams {
        kappa: SQRT_2 / 64.0,
        iterations: 3,
        mills: MillsRatio::Exact,
        ..DetectorParams::floating(&cfg)
    };
    let snr = 5.0;
    let n0 = cfg.noise_from_snr(snr);
    let sigma = n0.sqrt();
    let sigma_eff = params.effective_sigma(sigma);
    let mut steps = 0;
    let mut descending = 0;
    for t in 0..50 {
        let mut rng = trial_rng(202, 0, t);
        let ch = draw_channel(&cfg, &mut rng).unwrap();
        let payload: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
        let frame = modulate(&payload, &cfg).unwrap();
        let bits = transmit(&frame, &ch.freq, n0, &mut rng).unwrap().quantized;
        let zero = CMat::zeros(cfg.subcarriers, cfg.users);
        let mut prev = objective(&zero, &ch.freq, &bits, sigma_eff).unwrap();
        onebox_detect_observed(&bits, &ch.freq, sigma, &cfg, &params, &mut |_, s| {
            let f = objective(s, &ch.freq, &bits, sigma_eff).unwrap();
            steps += 1;
            descending += usize::from(f <= prev);
            prev = f;
        })
        .unwrap();
    }
    let elapsed = start.elapsed();
    let frac = descending as f64 / steps as f64;
    let ok = frac >= 0.95 && elapsed < Duration::from_secs(120);
    report(
        2,
        "small-instance descent",
        ok,
        &format!("{descending}/{steps} steps non-increasing ({:.1}%) in {elapsed:.2?}", 100.0 * frac),
    );
    assert!(ok);
}

/// BER 1e-2 crossing of `chain`, or `None` if it stays above.
fn crossing_of(res: &SweepResult, chain: Chain) -> Option<f64> {
    let pts: Vec<(f64, f64)> = res
        .curve(chain)
        .iter()
        .map(|r| (r.snr_db, r.ber().unwrap_or(0.5)))
        .collect();
    crossing(&pts, 1e-2)
}

/// Gap between the 1-bit ZF chain and NGD+1BOX at BER 1e-2, and whether
/// it is only a lower bound because ZF never reaches the target.
fn gap(res: &SweepResult) -> Option<(f64, bool)> {
    let ngd = crossing_of(res, Chain::NgdOnebox)?;
    match crossing_of(res, Chain::ZfZf) {
        Some(zf) => Some((zf - ngd, false)),
        None => {
            let top = res.config.sweep.snr_db.iter().cloned().fold(f64::MIN, f64::max);
            Some((top - ngd, true))
        }
    }
}

fn describe_gap(g: Option<(f64, bool)>) -> String {
    match g {
        Some((v, false)) => format!("gap {v:.2} dB"),
        Some((v, true)) => format!("gap >= {v:.2} dB (1-bit ZF never reaches 1e-2)"),
        None => "NGD+1BOX never reaches 1e-2".into(),
    }
}

fn print_curves(res: &SweepResult) {
    for &chain in &res.config.sweep.chains {
        let line: Vec<String> = res
            .curve(chain)
            .iter()
            .map(|r| format!("{}:{:.2e}", r.snr_db, r.ber().unwrap_or(f64::NAN)))
            .collect();
        say(&format!("    {:<17} {}", chain.name(), line.join(" ")));
    }
}

/// The default desk-scale experiment, one worker.
fn desk_scale() -> &'static (SweepResult, Duration) {
    static CELL: OnceLock<(SweepResult, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let run = RunConfig::default();
        let start = Instant::now();
        let res = ber_sweep(&run, 1).unwrap();
        (res, start.elapsed())
    })
}

fn large_qam() -> &'static SweepResult {
    static CELL: OnceLock<SweepResult> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut run = RunConfig::default();
        run.system.antennas = 128;
        run.system.users = 8;
        run.sweep.snr_db = (0..=8).map(|i| 2.5 * f64::from(i)).collect();
        run.sweep.trials = 200;
        ber_sweep(&run, 1).unwrap()
    })
}

#[test]
fn criterion_3_qam_separation() {
    let _g = serial();
    let (small, t_small) = desk_scale();
    print_curves(small);
    let g_small = gap(small);
    let ok_small = matches!(g_small, Some((v, _)) if v >= 6.0) && *t_small < Duration::from_secs(600);
    report(
        3,
        "16-QAM separation, 64x4",
        ok_small,
        &format!("{} in {t_small:.0?}", describe_gap(g_small)),
    );

    let start = Instant::now();
    let large = large_qam();
    print_curves(large);
    let g_large = gap(large);
    let ok_large = matches!(g_large, Some((v, _)) if v >= 6.0);
    report(
        3,
        "16-QAM separation, 128x8",
        ok_large,
        &format!("{} in {:.0?}", describe_gap(g_large), start.elapsed()),
    );
    assert!(ok_small && ok_large);
}

#[test]
fn criterion_4_psk_separation() {
    let _g = serial();
    let start = Instant::now();
    let mut run = RunConfig::default();
    run.system.antennas = 128;
    run.system.users = 8;
    run.system.constellation = ConstellationKind::Psk8;
    run.sweep.snr_db = (0..=8).map(|i| -5.0 + 2.5 * f64::from(i)).collect();
    run.sweep.trials = 200;
    run.sweep.chains = vec![Chain::ZfZf, Chain::NgdOnebox];
    let res = ber_sweep(&run, 1).unwrap();
    print_curves(&res);
    let g = gap(&res);
    let ok = matches!(g, Some((v, _)) if v >= 0.5);
    report(4, "8-PSK separation, 128x8", ok, &format!("{} in {:.0?}", describe_gap(g), start.elapsed()));
    assert!(ok);
}

/// `a <= b` within two-sigma Wilson bands.
fn ordered(a: &SweepRow, b: &SweepRow) -> bool {
    let (lo_a, _) = a.wilson_at(2.0).unwrap();
    let (_, hi_b) = b.wilson_at(2.0).unwrap();
    lo_a <= hi_b
}

fn check_ordering(res: &SweepResult) -> (bool, Vec<String>) {
    let perfect = res.curve(Chain::PerfectOnebox);
    let ngd = res.curve(Chain::NgdOnebox);
    let zf = res.curve(Chain::ZfOnebox);
    let mut ok = true;
    let mut bad = Vec::new();
    for ((p, n), z) in perfect.iter().zip(&ngd).zip(&zf) {
        let good = ordered(p, n) && ordered(n, z);
        if !good {
            bad.push(format!(
                "{} dB: {:.2e} / {:.2e} / {:.2e}",
                p.snr_db,
                p.ber().unwrap(),
                n.ber().unwrap(),
                z.ber().unwrap()
            ));
        }
        ok &= good;
    }
    (ok, bad)
}

#[test]
fn criterion_5_csi_ordering() {
    let _g = serial();
    let mut all = true;
    for (label, res) in [("64x4", &desk_scale().0), ("128x8", large_qam())] {
        let (ok, bad) = check_ordering(res);
        let detail = if ok {
            format!("perfect <= NGD <= ZF at all {} points", res.config.sweep.snr_db.len())
        } else {
            format!("violations at {}", bad.join("; "))
        };
        report(5, &format!("CSI ordering, {label}"), ok, &detail);
        all &= ok;
    }
    assert!(all);
}

#[test]
fn criterion_6_fixed_point_fidelity() {
    let _g = serial();
    let res = large_qam();
    let d = res
        .disagreement
        .iter()
        .find(|d| d.snr_db == 10.0)
        .expect("10 dB is on the grid");
    let rate = d.rate();
    let fl = crossing_of(res, Chain::NgdOnebox);
    let fx = crossing_of(res, Chain::NgdOneboxFixed);
    let shift = match (fl, fx) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let ok = rate <= 0.01 && matches!(shift, Some(s) if s <= 0.5);
    report(
        6,
        "fixed-point fidelity, 128x8",
        ok,
        &format!(
            "disagreement {:.3}% ({} of {}) at 10 dB, crossing shift {}",
            100.0 * rate,
            d.differ,
            d.compared,
            shift.map_or("undefined".into(), |s| format!("{s:.2} dB"))
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_tdmle_projector() {
    let _g = serial();
    let mut ok = true;
    let mut details = Vec::new();
    for taps in [3, 8] {
        let cfg = SystemConfig {
            taps,
            ..SystemConfig::default()
        };
        let t = Tdmle::new(&cfg).unwrap();
        let p = t.matrix();
        let n = p.rows();
        let p2 = p.matmul(&p).unwrap();
        let mut herm: f64 = 0.0;
        let mut idem: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                herm = herm.max((p[(i, j)] - p[(j, i)].conj()).norm());
                idem = idem.max((p2[(i, j)] - p[(i, j)]).norm());
            }
        }
        let mut rng = trial_rng(707, taps as u64, 0);
        let (mut before, mut after) = (0.0, 0.0);
        for _ in 0..1000 {
            let noise: Vec<Complex64> = (0..n).map(|_| cn(&mut rng)).collect();
            before += noise.iter().map(|z| z.norm_sqr()).sum::<f64>();
            after += t.apply(&noise).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let factor = after / before;
        let expected = taps as f64 / cfg.used_subcarriers as f64;
        let good = herm <= 1e-10 && idem <= 1e-10 && (factor / expected - 1.0).abs() <= 0.25;
        ok &= good;
        details.push(format!(
            "L={taps}: hermitian {herm:.1e}, idempotent {idem:.1e}, noise factor {factor:.4} vs {expected:.4}"
        ));
    }
    report(7, "TDMLE projector", ok, &details.join("; "));
    assert!(ok);
}

/// Counts of the loop body, one term per operation of an iteration.
fn multiplications_oracle(b: u64, u: u64, w: u64, k: u64) -> u64 {
    let log2w = 63 - u64::from(w.leading_zeros());
    let mut per_iteration = 0;
    for _antenna in 0..b {
        per_iteration += 4 * u * w; // W inner products of length U
        per_iteration += 2 * w * log2w; // inverse FFT
        per_iteration += w; // omega lookups
        per_iteration += 2 * w * log2w; // forward FFT
    }
    for _subcarrier in 0..w {
        per_iteration += 4 * u * b; // H_w^H V_w
        per_iteration += 2 * u; // scaling by kappa
    }
    k * per_iteration
}

#[test]
fn criterion_8_complexity_counter() {
    let _g = serial();
    let mut rng = trial_rng(808, 0, 0);
    let mut cases = vec![(128, 8, 128, 1, Some(1_525_760)), (64, 4, 128, 1, Some(500_736)), (128, 8, 128, 3, Some(4_577_280))];
    for _ in 0..10 {
        let u = rng.random_range(1..=16u64);
        let b = rng.random_range(u..=256);
        let w = 1u64 << rng.random_range(1..=12);
        let k = rng.random_range(1..=10);
        cases.push((b, u, w, k, None));
    }
    let mut ok = true;
    for &(b, u, w, k, worked) in &cases {
        let cfg = SystemConfig {
            antennas: b as usize,
            users: u as usize,
            subcarriers: w as usize,
            used_subcarriers: w as usize,
            ..SystemConfig::default()
        };
        let got = count_multiplications(&cfg, k);
        let want = multiplications_oracle(b, u, w, k);
        ok &= got == want && worked.is_none_or(|v| v == got);
    }
    report(8, "complexity counter", ok, &format!("{} tuples checked", cases.len()));
    assert!(ok);
}

#[test]
fn criterion_9_determinism_across_workers() {
    let _g = serial();
    let (one, _) = desk_scale();
    let start = Instant::now();
    let eight = ber_sweep(&RunConfig::default(), 8).unwrap();
    let a = results_csv(one).unwrap();
    let b = results_csv(&eight).unwrap();
    let ok = a == b;
    report(
        9,
        "determinism, 1 vs 8 workers",
        ok,
        &format!("{} bytes, identical: {ok}, 8-worker run {:.0?}", a.len(), start.elapsed()),
    );
    assert!(ok);
}
