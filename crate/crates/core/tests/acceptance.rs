//! Acceptance criteria. Runs every criterion in order, prints one line per
//! criterion and exits non-zero if any of them fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use vlcsim::analytics::{self, wilson_interval, SyncProbabilityInputs, Z95};
use vlcsim::channel::{self, db_to_linear, RxFrontEnd};
use vlcsim::framing::{detect_frames, FramePlan, FrameSpec};
use vlcsim::harness::duty::{duty_sweep, DutyStudy};
use vlcsim::harness::metrics::banded_levenshtein;
use vlcsim::harness::{
    run_point, run_sweep, transmit_burst, write_csv, LinkSetup, Point, PointStats, SnrAxis, StopRules, SweepConfig,
    SweepReport, V_OFF, V_ON,
};
use vlcsim::rng::{self, seeded};
use vlcsim::sampler::FastLine;
use vlcsim::serial::{oversample_bits, uart_decode, uart_encode, LineBits, Parity, SampledLine, UartConfig};

/// One-sided 95% normal quantile.
const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(t: Duration, budget_s: f64) -> bool {
    t.as_secs_f64() <= budget_s
}

fn default_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.conf")
}

/// Every harness run in this file passes through here.
fn accounted(stats: &PointStats) -> &PointStats {
    assert!(
        stats.is_accounted(),
        "accounting broken: clean {} + substituted {} + dropped {} != sent {}",
        stats.clean,
        stats.substituted,
        stats.dropped,
        stats.frames_sent
    );
    stats
}

fn sweep_csv(cfg: &SweepConfig) -> (SweepReport, Vec<u8>) {
    let report = run_sweep(cfg).expect("default sweep");
    for p in &report.points {
        if let Some(s) = &p.stats {
            accounted(s);
        }
    }
    let mut csv = Vec::new();
    write_csv(&report, &mut csv).expect("csv");
    (report, csv)
}

struct DefaultRun {
    cfg: SweepConfig,
    report: SweepReport,
    csv: Vec<u8>,
    elapsed: Duration,
}

fn default_run() -> &'static DefaultRun {
    static RUN: OnceLock<DefaultRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = SweepConfig::load(&default_config_path()).expect("default config");
        let t = Instant::now();
        let (report, csv) = sweep_csv(&cfg);
        DefaultRun {
            cfg,
            report,
            csv,
            elapsed: t.elapsed(),
        }
    })
}

fn codec_exactness() -> Outcome {
    let t = Instant::now();
    let mut combos = 0;
    let mut mismatches = 0;
    for data_bits in [7u8, 8] {
        for stop_bits in [1u8, 2] {
            for parity in Parity::ALL {
                let cfg = UartConfig::new(data_bits, parity, stop_bits, 9600.0, 16).unwrap();
                let bytes: Vec<u8> = (0..1u16 << data_bits).map(|b| b as u8).collect();
                let line = uart_encode(&bytes, &cfg).unwrap().padded(2, 2);
                let got = uart_decode(&oversample_bits(&line, 16), &cfg, 0).unwrap();
                mismatches += bytes.iter().zip(&got.bytes).filter(|(a, b)| a != b).count();
                mismatches += bytes.len().abs_diff(got.bytes.len());
                mismatches += got.flags.iter().filter(|f| !f.is_ok()).count();
                combos += 1;
            }
        }
    }
    let dt = t.elapsed();
    outcome(
        mismatches == 0 && within_budget(dt, 1.0),
        format!("{combos} framings, {mismatches} mismatches, {:.3} s", dt.as_secs_f64()),
    )
}

fn ber_agreement() -> Outcome {
    const BITS: usize = 2_000_000;
    let t = Instant::now();
    let uart = UartConfig::default();
    let fe = RxFrontEnd::default();
    let mut rng = seeded(20);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for db in [0.0, 3.0, 6.0, 9.0, 12.0] {
        let snr = db_to_linear(db);
        let link = LinkSetup::new(snr, uart.baud, &uart, &fe).unwrap();
        let bits: Vec<u8> = (0..BITS).map(|_| rng.random_range(0..=1u8)).collect();
        let line = LineBits::from_bits(bits);
        let mut noise_rng = rng::seeded(rng.random());
        let mut fast = FastLine::new(
            &line,
            link.samples_per_bit,
            V_ON,
            V_OFF,
            link.noise_std,
            &fe,
            link.sample_rate,
            &mut noise_rng,
        )
        .unwrap();
        let sps = link.samples_per_bit;
        let half = (sps / 2.0) as usize;
        let errors = line
            .as_slice()
            .iter()
            .enumerate()
            .filter(|&(k, &b)| fast.level(channel::bit_boundary(k, sps) + half) != (b == 1))
            .count();
        let p = analytics::ber_ook(snr).unwrap();
        let measured = errors as f64 / BITS as f64;
        let z = (measured - p).abs() / analytics::binomial_sigma(p, BITS as u64);
        worst = worst.max(z);
        parts.push(format!("{db} dB {measured:.3e}/{p:.3e}"));
    }
    let dt = t.elapsed();
    outcome(
        worst <= 3.0 && within_budget(dt, 120.0),
        format!(
            "worst {worst:.2} sigma; {}; {:.1} s",
            parts.join(", "),
            dt.as_secs_f64()
        ),
    )
}

fn ser_agreement() -> Outcome {
    const CHARS: usize = 125_000;
    const BURST: usize = 5_000;
    let t = Instant::now();
    let uart = UartConfig::default();
    let fe = RxFrontEnd::default();
    let mut rng = seeded(30);
    let mut all_ok = true;
    let mut parts = Vec::new();
    for db in [7.0, 8.0, 9.0, 10.0, 11.0, 12.0] {
        let snr = db_to_linear(db);
        let link = LinkSetup::new(snr, uart.baud, &uart, &fe).unwrap();
        let mut errors = 0usize;
        for _ in 0..CHARS / BURST {
            let sent: Vec<u8> = (0..BURST).map(|_| rng.random()).collect();
            let got = transmit_burst(&sent, &uart, 0, 0, &fe, &link, &mut rng).unwrap();
            errors += banded_levenshtein(&sent, &got, 32);
        }
        let p = analytics::ser_ttl(snr).unwrap();
        let measured = errors as f64 / CHARS as f64;
        let tol = (3.0 * analytics::binomial_sigma(p, CHARS as u64)).max(0.15 * p);
        all_ok &= (measured - p).abs() <= tol;
        parts.push(format!("{db} dB x{:.2}", measured / p));
    }
    let dt = t.elapsed();
    outcome(
        all_ok && within_budget(dt, 300.0),
        format!("measured/predicted: {}; {:.1} s", parts.join(", "), dt.as_secs_f64()),
    )
}

fn pfail_agreement() -> Outcome {
    const FRAMES: usize = 20_000;
    const BATCH: usize = 16;
    const P_S: f64 = 1e-3;
    let t = Instant::now();
    let mut rng = seeded(40);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for n_sync in [1usize, 5, 10] {
        let spec = FrameSpec::default().with_frame_len(1003).unwrap().with_sync_len(n_sync);
        let plan = FramePlan::new(&spec).unwrap();
        let mut dropped = 0usize;
        for _ in 0..FRAMES / BATCH {
            let mut stream = plan.build_stream(0, BATCH);
            for s in &mut stream {
                if rng.random::<f64>() < P_S {
                    *s = s.wrapping_add(rng.random_range(1..=255u8));
                }
            }
            dropped += detect_frames(&stream, &plan, BATCH)
                .iter()
                .filter(|r| r.is_dropped())
                .count();
        }
        let p = analytics::p_fail(&SyncProbabilityInputs::new(n_sync as u32, 1000, P_S)).unwrap();
        let measured = dropped as f64 / FRAMES as f64;
        let z = (measured - p).abs() / analytics::binomial_sigma(p, FRAMES as u64);
        worst = worst.max(z);
        parts.push(format!("sync {n_sync} {measured:.4}/{p:.4}"));
    }
    let dt = t.elapsed();
    outcome(
        worst <= 3.0 && within_budget(dt, 60.0),
        format!(
            "worst {worst:.2} sigma; {}; {:.1} s",
            parts.join(", "),
            dt.as_secs_f64()
        ),
    )
}

/// Fixed-budget run of one point: no early stopping.
fn fixed_point(baud: f64, snr_db: f64, frame_len: usize, sync_len: usize, frames: u64, seed: u64) -> PointStats {
    let cfg = SweepConfig {
        bauds: vec![baud],
        snr: SnrAxis::Db(vec![snr_db]),
        frame_lengths: vec![frame_len],
        sync_lengths: vec![sync_len],
        stop_rules: StopRules {
            max_sim_frames: frames,
            min_error_packets: u64::MAX,
            clean_run_frames: u64::MAX,
        },
        duty_bits: 0,
        base_seed: seed,
        ..SweepConfig::default()
    };
    let point = Point {
        index: 0,
        baud,
        snr_db: Some(snr_db),
        distance_m: None,
        frame_len,
        sync_len,
    };
    let r = run_point(&cfg, &point);
    accounted(r.stats.as_ref().expect("point ran")).clone()
}

/// z statistic for `p_b > p_a` with a pooled variance.
fn proportion_z(dropped_a: u64, n_a: u64, dropped_b: u64, n_b: u64) -> f64 {
    let (pa, pb) = (dropped_a as f64 / n_a as f64, dropped_b as f64 / n_b as f64);
    let pool = (dropped_a + dropped_b) as f64 / (n_a + n_b) as f64;
    let se = (pool * (1.0 - pool) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (pb - pa) / se
    }
}

/// Mean and variance of the substitution count over received frames.
fn substitution_moments(s: &PointStats) -> (f64, f64, u64) {
    let n = s.histogram.received();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = s.histogram.bins.iter().map(|(&k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64;
    let var = s
        .histogram
        .bins
        .iter()
        .map(|(&k, &c)| (k as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / n as f64;
    (mean, var, n)
}

/// z statistic for `mean_b > mean_a`.
fn mean_z(a: &PointStats, b: &PointStats) -> f64 {
    let (ma, va, na) = substitution_moments(a);
    let (mb, vb, nb) = substitution_moments(b);
    if na < 2 || nb < 2 {
        return f64::NAN;
    }
    let se = (va / na as f64 + vb / nb as f64).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (mb - ma) / se
    }
}

fn ordered_increasing(stats: &[PointStats], key: impl Fn(&PointStats, &PointStats) -> f64) -> (bool, Vec<f64>) {
    let zs: Vec<f64> = stats.windows(2).map(|w| key(&w[0], &w[1])).collect();
    (zs.iter().all(|&z| z > Z95_ONE_SIDED), zs)
}

fn fmt_z(zs: &[f64]) -> String {
    zs.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>().join("/")
}

fn drop_z(a: &PointStats, b: &PointStats) -> f64 {
    proportion_z(a.dropped, a.frames_sent, b.dropped, b.frames_sent)
}

const TREND_SNR_DB: f64 = 12.0;
const TREND_BAUD: f64 = 50e3;

fn sync_trend() -> Outcome {
    let stats: Vec<PointStats> = [1usize, 5, 10]
        .iter()
        .map(|&s| fixed_point(TREND_BAUD, TREND_SNR_DB, 1003, s, 3_000, 50))
        .collect();
    let (drops_up, dz) = ordered_increasing(&stats, drop_z);
    let (subs_down, sz) = ordered_increasing(&stats, |a, b| -mean_z(a, b));
    let drops: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.p_bse)).collect();
    let means: Vec<String> = stats
        .iter()
        .map(|s| format!("{:.2}", s.mean_substitutions().unwrap_or(f64::NAN)))
        .collect();
    outcome(
        drops_up && subs_down,
        format!(
            "drop fraction {} (z {}), mean subs {} (z {})",
            drops.join("/"),
            fmt_z(&dz),
            means.join("/"),
            fmt_z(&sz)
        ),
    )
}

fn length_trend() -> Outcome {
    let stats: Vec<PointStats> = [(1003usize, 3_000u64), (5003, 600), (10003, 300)]
        .iter()
        .map(|&(len, n)| fixed_point(TREND_BAUD, TREND_SNR_DB, len, 1, n, 60))
        .collect();
    let (drops_up, dz) = ordered_increasing(&stats, drop_z);
    let (subs_up, sz) = ordered_increasing(&stats, mean_z);
    let drops: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.p_bse)).collect();
    let means: Vec<String> = stats
        .iter()
        .map(|s| format!("{:.2}", s.mean_substitutions().unwrap_or(f64::NAN)))
        .collect();
    outcome(
        drops_up && subs_up,
        format!(
            "drop fraction {} (z {}), mean subs {} (z {})",
            drops.join("/"),
            fmt_z(&dz),
            means.join("/"),
            fmt_z(&sz)
        ),
    )
}

fn snr_trend() -> Outcome {
    let run = default_run();
    let mut tuples = 0;
    let mut increases = Vec::new();
    let mut separated = Vec::new();
    for &baud in &run.cfg.bauds {
        for &frame_len in &run.cfg.frame_lengths {
            for &sync_len in &run.cfg.sync_lengths {
                let mut series: Vec<(f64, &PointStats)> = run
                    .report
                    .points
                    .iter()
                    .filter(|p| p.point.baud == baud && p.point.frame_len == frame_len && p.point.sync_len == sync_len)
                    .filter_map(|p| Some((p.snr_db?, p.stats.as_ref()?)))
                    .collect();
                series.sort_by(|a, b| a.0.total_cmp(&b.0));
                tuples += 1;
                for w in series.windows(2) {
                    if w[1].1.p_bse > w[0].1.p_bse {
                        increases.push(format!("{baud}/{frame_len}/{sync_len} at {} dB", w[1].0));
                    }
                }
                let high: Vec<_> = series.iter().filter(|(db, _)| *db >= 18.0).collect();
                for (i, a) in high.iter().enumerate() {
                    for b in &high[i + 1..] {
                        let ia = wilson_interval(a.1.dropped, a.1.frames_sent, Z95);
                        let ib = wilson_interval(b.1.dropped, b.1.frames_sent, Z95);
                        if ia.1 < ib.0 || ib.1 < ia.0 {
                            separated.push(format!("{baud}/{frame_len}/{sync_len} {} vs {} dB", a.0, b.0));
                        }
                    }
                }
            }
        }
    }
    outcome(
        increases.is_empty() && separated.is_empty(),
        format!(
            "{tuples} tuples; increases: {}; separated above 18 dB: {}",
            if increases.is_empty() {
                "none".into()
            } else {
                increases.join(", ")
            },
            if separated.is_empty() {
                "none".into()
            } else {
                separated.join(", ")
            }
        ),
    )
}

fn dmax() -> Outcome {
    let d = channel::max_los_distance(0.35, 60.0, 60.0).unwrap();
    outcome((d - 0.202).abs() <= 0.01, format!("{d:.4} m"))
}

fn lambertian() -> Outcome {
    let m = channel::lambertian_order(60.0).unwrap();
    outcome((m - 1.0).abs() <= 1e-12, format!("m = {m}"))
}

fn comparator_compensation() -> Outcome {
    let t = Instant::now();
    let mut all_ok = true;
    let mut parts = Vec::new();
    for baud in [500e3, 750e3, 1e6] {
        let res = duty_sweep(&DutyStudy::new(baud, 25.0)).unwrap();
        let duty: Vec<f64> = res.points.iter().map(|p| p.duty.positive).collect();
        let monotone = duty.windows(2).all(|w| w[1] >= w[0]);
        let start = duty[0];
        let hit = res.points.iter().find(|p| (p.duty.positive - 50.0).abs() <= 5.0);
        all_ok &= monotone && start < 30.0 && hit.is_some();
        parts.push(format!(
            "{} kbaud {start:.1}% -> {}",
            baud / 1e3,
            hit.map_or("no 45-55% ref".into(), |p| format!(
                "{:.1}% at ref {:.2}",
                p.duty.positive, p.comparator_ref
            ))
        ));
    }
    let dt = t.elapsed();
    outcome(
        all_ok && within_budget(dt, 60.0),
        format!("{}; {:.1} s", parts.join(", "), dt.as_secs_f64()),
    )
}

fn determinism() -> Outcome {
    let first = default_run();
    let t = Instant::now();
    let (_, csv) = sweep_csv(&first.cfg);
    let second = t.elapsed();
    let identical = csv == first.csv;
    let worst = first.elapsed.max(second);
    outcome(
        identical && within_budget(worst, 600.0),
        format!(
            "{} points, csv {}, runs {:.0} s and {:.0} s",
            first.report.points.len(),
            if identical { "identical" } else { "differs" },
            first.elapsed.as_secs_f64(),
            second.as_secs_f64()
        ),
    )
}

fn accounting() -> Outcome {
    let run = default_run();
    let ran: Vec<&PointStats> = run.report.points.iter().filter_map(|p| p.stats.as_ref()).collect();
    let bad = ran
        .iter()
        .filter(|s| s.clean + s.substituted + s.dropped != s.frames_sent || !s.is_accounted())
        .count();
    outcome(
        bad == 0 && !ran.is_empty(),
        format!(
            "{} sweep points checked, {bad} unbalanced; every harness run above asserted too",
            ran.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        (1, "codec exactness", codec_exactness),
        (2, "BER agreement", ber_agreement),
        (3, "SER agreement", ser_agreement),
        (4, "p_fail agreement", pfail_agreement),
        (5, "sync length trend", sync_trend),
        (6, "frame length trend", length_trend),
        (7, "SNR trend", snr_trend),
        (8, "d_max", dmax),
        (9, "Lambertian order", lambertian),
        (10, "comparator compensation", comparator_compensation),
        (11, "determinism", determinism),
        (12, "accounting invariant", accounting),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut err = std::io::stderr().lock();
    for (n, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let o = run();
        if !o.pass {
            failed += 1;
        }
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "criterion {n:>2} {verdict} {name}: {}", o.detail).unwrap();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        writeln!(err, "{failed} acceptance criteria failed").unwrap();
        ExitCode::FAILURE
    }
}
