//! Monte Carlo sweeps over baud rate, link quality, frame length and sync
//! length.
//!
//! Each parameter point is simulated as a series of independent bursts of
//! back-to-back frames. A burst goes through the whole chain (UART encode,
//! OOK, noise, TIA, comparator, UART decode, frame detection) and the
//! per-frame verdicts are accumulated until a stop rule fires. Points are
//! independent: each derives its own seed from the base seed and its own
//! parameters, so adding or removing points never changes the others.

pub mod config;
pub mod duty;
pub mod metrics;
pub mod report;

use std::fs::OpenOptions;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{Format, SnrAxis, StopRules, SweepConfig};
pub use report::{emit_report, write_csv, write_json, SweepReport};

use crate::analytics::{self, ErrorHistogram, SyncProbabilityInputs};
use crate::channel::{self, db_to_linear, linear_to_db, noise_gain, pole, RxFrontEnd};
use crate::error::{Error, Result};
use crate::framing::{detect_frames, DropCause, FramePlan, Verdict};
use crate::rng::{self, SimRng};
use crate::sampler::FastLine;
use crate::serial::{encode_gapped, LineBits, SliceLine, UartConfig, UartReceiver};

/// Idle bit periods before and after each burst.
const IDLE_PAD_BITS: usize = 2;
/// Band half-width for the stream edit distance.
const SER_BAND: usize = 32;
/// Mixed into the point seed for the duty-cycle side run.
const DUTY_SEED_KEY: u64 = 0x6475_7479;

/// Logic levels of the normalised received waveform.
pub const V_ON: f64 = 1.0;
pub const V_OFF: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub index: usize,
    pub baud: f64,
    /// Set when the sweep is over SNR.
    pub snr_db: Option<f64>,
    /// Set when the sweep is over distance.
    pub distance_m: Option<f64>,
    pub frame_len: usize,
    pub sync_len: usize,
}

impl SweepConfig {
    /// Cross product of the sweep axes, baud outermost, sync length innermost.
    pub fn points(&self) -> Vec<Point> {
        let axis: Vec<(Option<f64>, Option<f64>)> = match &self.snr {
            SnrAxis::Db(v) => v.iter().map(|&x| (Some(x), None)).collect(),
            SnrAxis::Distance(v) => v.iter().map(|&x| (None, Some(x))).collect(),
        };
        let mut out = Vec::new();
        for &baud in &self.bauds {
            for &(snr_db, distance_m) in &axis {
                for &frame_len in &self.frame_lengths {
                    for &sync_len in &self.sync_lengths {
                        out.push(Point {
                            index: out.len(),
                            baud,
                            snr_db,
                            distance_m,
                            frame_len,
                            sync_len,
                        });
                    }
                }
            }
        }
        out
    }
}

/// FNV-1a over the point parameters; stable across platforms and builds.
fn point_key(p: &Point) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(p.baud.to_bits());
    match (p.snr_db, p.distance_m) {
        (Some(x), _) => {
            feed(1);
            feed(x.to_bits());
        }
        (None, Some(d)) => {
            feed(2);
            feed(d.to_bits());
        }
        (None, None) => feed(0),
    }
    feed(p.frame_len as u64);
    feed(p.sync_len as u64);
    h
}

pub fn point_seed(base_seed: u64, p: &Point) -> u64 {
    rng::derive_seed(base_seed, point_key(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ErrorPackets,
    CleanRun,
    MaxFrames,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub ber: f64,
    pub ser: f64,
    pub ser_raw: f64,
    pub p_fail: f64,
    pub p_err: f64,
}

impl Analytic {
    pub fn at(snr: f64, frame_len: usize, sync_len: usize) -> Result<Self> {
        let ser = analytics::ser_ttl(snr)?;
        let inp = SyncProbabilityInputs::new(sync_len as u32, frame_len as u32, ser);
        Ok(Analytic {
            ber: analytics::ber_ook(snr)?,
            ser,
            ser_raw: analytics::ser_ttl_raw(snr)?,
            p_fail: analytics::p_fail(&inp)?,
            p_err: analytics::p_err(&inp)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub frames_sent: u64,
    pub clean: u64,
    pub substituted: u64,
    pub dropped: u64,
    pub dropped_length_mismatch: u64,
    pub dropped_missed: u64,
    pub p_bse: f64,
    pub reliability: f64,
    /// Wilson 95% interval on `p_bse`.
    pub p_bse_ci95: (f64, f64),
    pub histogram: ErrorHistogram,
    pub substitutions_total: u64,
    pub ser_symbols: u64,
    pub ser_errors: u64,
    pub measured_ser: f64,
    pub duty_pos_pct: Option<f64>,
    pub stop_reason: StopReason,
}

impl PointStats {
    /// Mean substitutions among received frames, if any were received.
    pub fn mean_substitutions(&self) -> Option<f64> {
        let received = self.clean + self.substituted;
        (received > 0).then(|| self.substitutions_total as f64 / received as f64)
    }

    pub fn is_accounted(&self) -> bool {
        self.clean + self.substituted + self.dropped == self.frames_sent
            && self.histogram.is_consistent()
            && self.histogram.total == self.frames_sent
            && self.histogram.dropped == self.dropped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: Point,
    /// Resolved SNR in dB (equal to the axis value in SNR sweeps).
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub skipped: Option<String>,
    pub analytic: Option<Analytic>,
    pub stats: Option<PointStats>,
    pub wall_time_s: f64,
}

/// Noise and threshold for one point, on the normalised 0/1 V waveform.
#[derive(Debug, Clone, Copy)]
pub struct LinkSetup {
    pub snr: f64,
    pub sample_rate: f64,
    pub samples_per_bit: f64,
    /// White-noise standard deviation before the TIA.
    pub noise_std: f64,
}

impl LinkSetup {
    /// Chooses the pre-filter noise so that the filtered noise at the
    /// slicer has variance `(V_ON - V_OFF)^2 / (4 snr)`.
    pub fn new(snr: f64, baud: f64, uart: &UartConfig, fe: &RxFrontEnd) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::invalid(format!("SNR must be > 0, got {snr}")));
        }
        let samples_per_bit = f64::from(uart.oversample);
        let sample_rate = samples_per_bit * baud;
        let a = pole(fe.tia_bandwidth, sample_rate);
        let post_std = (V_ON - V_OFF) / (2.0 * snr.sqrt());
        Ok(LinkSetup {
            snr,
            sample_rate,
            samples_per_bit,
            noise_std: post_std / noise_gain(a).sqrt(),
        })
    }
}

/// Sends `bytes` as one burst, each character followed by `char_gap` idle
/// bits, and returns what the UART receiver decodes.
#[allow(clippy::too_many_arguments)]
pub fn transmit_burst(
    bytes: &[u8],
    uart: &UartConfig,
    char_gap: usize,
    skew_ppm: i32,
    fe: &RxFrontEnd,
    link: &LinkSetup,
    rng: &mut SimRng,
) -> Result<Vec<u8>> {
    let mut bits = vec![1u8; IDLE_PAD_BITS];
    encode_gapped(bytes, uart, char_gap, &mut bits)?;
    bits.resize(bits.len() + IDLE_PAD_BITS, 1);
    let line = LineBits::from_bits(bits);
    let rx = UartReceiver::new(uart, skew_ppm)?;
    let mut out = Vec::with_capacity(bytes.len() + 8);
    if fe.is_linear_memoryless() {
        let mut fast = FastLine::new(
            &line,
            link.samples_per_bit,
            V_ON,
            V_OFF,
            link.noise_std,
            fe,
            link.sample_rate,
            rng,
        )?;
        rx.run(&mut fast, |b, _| out.push(b));
    } else {
        let sliced = full_chain(&line, uart.baud, fe, link, rng)?;
        rx.run(&mut SliceLine(&sliced), |b, _| out.push(b));
    }
    Ok(out)
}

/// Sample-by-sample chain: modulate, add noise, filter, slice.
pub fn full_chain(line: &LineBits, baud: f64, fe: &RxFrontEnd, link: &LinkSetup, rng: &mut SimRng) -> Result<Vec<u8>> {
    let filtered = analog_chain(line, baud, fe, link, rng)?;
    Ok(channel::comparator_slice(&filtered, fe))
}

/// Slicer input for `line`.
pub fn analog_chain(
    line: &LineBits,
    baud: f64,
    fe: &RxFrontEnd,
    link: &LinkSetup,
    rng: &mut SimRng,
) -> Result<channel::Waveform> {
    let mut w = channel::modulate_ook(line, baud, link.sample_rate, V_ON, V_OFF)?;
    rng::add_awgn(&mut w.samples, link.noise_std, rng);
    channel::tia_lowpass(&w, fe)
}

#[derive(Default)]
struct Tally {
    frames_sent: u64,
    clean: u64,
    substituted: u64,
    dropped_length_mismatch: u64,
    dropped_missed: u64,
    histogram: ErrorHistogram,
    substitutions_total: u64,
    clean_run: u64,
    ser_symbols: u64,
    ser_errors: u64,
}

impl Tally {
    fn dropped(&self) -> u64 {
        self.dropped_length_mismatch + self.dropped_missed
    }

    fn stop_reason(&self, rules: &StopRules) -> Option<StopReason> {
        if self.substituted >= rules.min_error_packets || self.dropped() >= rules.min_error_packets {
            Some(StopReason::ErrorPackets)
        } else if self.clean_run >= rules.clean_run_frames {
            Some(StopReason::CleanRun)
        } else if self.frames_sent >= rules.max_sim_frames {
            Some(StopReason::MaxFrames)
        } else {
            None
        }
    }
}

fn resolve_snr(cfg: &SweepConfig, p: &Point) -> Result<f64> {
    match (p.snr_db, p.distance_m) {
        (Some(db), _) => Ok(db_to_linear(db)),
        (None, Some(d)) => {
            let snr = channel::received_snr(&cfg.channel.with_distance(d), cfg.include_nlos)?;
            if snr <= 0.0 {
                return Err(Error::OutOfRange(format!("no optical path at {d} m")));
            }
            Ok(snr)
        }
        (None, None) => Err(Error::invalid("point has neither SNR nor distance")),
    }
}

/// Simulates one parameter point. Problems specific to the point are
/// reported through `skipped`; they never abort a sweep.
pub fn run_point(cfg: &SweepConfig, p: &Point) -> PointReport {
    let started = Instant::now();
    let seed = point_seed(cfg.base_seed, p);
    let mut report = PointReport {
        point: *p,
        snr_db: p.snr_db,
        seed,
        skipped: None,
        analytic: None,
        stats: None,
        wall_time_s: 0.0,
    };
    let sample_rate = f64::from(cfg.uart.oversample) * p.baud;
    if sample_rate > cfg.max_sample_rate {
        report.skipped = Some(format!(
            "receiver sample rate {sample_rate} Hz exceeds max_sample_rate {} Hz",
            cfg.max_sample_rate
        ));
        return report;
    }
    match simulate_point(cfg, p, seed) {
        Ok((snr, analytic, stats)) => {
            report.snr_db = Some(linear_to_db(snr));
            report.analytic = Some(analytic);
            report.stats = Some(stats);
        }
        Err(e) => report.skipped = Some(e.to_string()),
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    report
}

fn simulate_point(cfg: &SweepConfig, p: &Point, seed: u64) -> Result<(f64, Analytic, PointStats)> {
    let snr = resolve_snr(cfg, p)?;
    let uart = cfg.uart.with_baud(p.baud);
    let link = LinkSetup::new(snr, p.baud, &uart, &cfg.front_end)?;
    let spec = cfg.frame.with_frame_len(p.frame_len)?.with_sync_len(p.sync_len);
    let plan = FramePlan::new(&spec)?;
    let analytic = Analytic::at(snr, p.frame_len, p.sync_len)?;
    let rules = cfg.stop_rules;
    let mut rng = rng::seeded(seed);
    let mut t = Tally::default();

    let stop = 'bursts: loop {
        let remaining = rules.max_sim_frames - t.frames_sent;
        let count = (cfg.batch_frames as u64).min(remaining) as usize;
        let sent = plan.build_stream(0, count);
        let received = transmit_burst(
            &sent,
            &uart,
            cfg.char_gap_bits,
            cfg.clock_skew_ppm,
            &cfg.front_end,
            &link,
            &mut rng,
        )?;
        t.ser_symbols += sent.len() as u64;
        t.ser_errors += metrics::banded_levenshtein(&sent, &received, SER_BAND) as u64;
        for r in detect_frames(&received, &plan, count) {
            t.frames_sent += 1;
            match r.verdict {
                Verdict::Clean => {
                    t.clean += 1;
                    t.clean_run += 1;
                    t.histogram.record_received(0);
                }
                Verdict::Substituted => {
                    t.substituted += 1;
                    t.clean_run = 0;
                    t.substitutions_total += r.substitution_count as u64;
                    t.histogram.record_received(r.substitution_count);
                }
                Verdict::Dropped => {
                    t.clean_run = 0;
                    match r.drop_cause {
                        DropCause::MissedFrame => t.dropped_missed += 1,
                        _ => t.dropped_length_mismatch += 1,
                    }
                    t.histogram.record_dropped();
                }
            }
            if let Some(reason) = t.stop_reason(&rules) {
                break 'bursts reason;
            }
        }
    };

    let duty_pos_pct = if cfg.duty_bits > 0 {
        let mut r = rng::seeded(seed ^ DUTY_SEED_KEY);
        Some(duty::random_payload_duty(&uart, &cfg.front_end, &link, cfg.duty_bits, &mut r)?.positive)
    } else {
        None
    };

    let dropped = t.dropped();
    let p_bse = dropped as f64 / t.frames_sent as f64;
    let stats = PointStats {
        frames_sent: t.frames_sent,
        clean: t.clean,
        substituted: t.substituted,
        dropped,
        dropped_length_mismatch: t.dropped_length_mismatch,
        dropped_missed: t.dropped_missed,
        p_bse,
        reliability: 1.0 - p_bse,
        p_bse_ci95: analytics::wilson_interval(dropped, t.frames_sent, analytics::Z95),
        histogram: t.histogram,
        substitutions_total: t.substitutions_total,
        ser_symbols: t.ser_symbols,
        ser_errors: t.ser_errors,
        measured_ser: t.ser_errors as f64 / t.ser_symbols as f64,
        duty_pos_pct,
        stop_reason: stop,
    };
    debug_assert!(stats.is_accounted());
    Ok((snr, analytic, stats))
}

/// Checks that `path` can be written before any simulation starts.
fn check_writable(path: &std::path::Path) -> Result<()> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(|_| ())
        .map_err(|e| Error::io(path, e))
}

/// Runs every point on `cfg.workers` threads and, if an output path is
/// configured, writes the report there.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if let Some(path) = &cfg.output_path {
        check_writable(path)?;
    }
    let points = cfg.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let reports: Vec<PointReport> = pool.install(|| {
        use rayon::prelude::*;
        points.par_iter().map(|p| run_point(cfg, p)).collect()
    });
    let report = SweepReport {
        hist_overflow: cfg.hist_overflow,
        points: reports,
    };
    if let Some(path) = &cfg.output_path {
        emit_report(&report, cfg.format, path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(snr_db: f64, baud: f64) -> SweepConfig {
        SweepConfig {
            bauds: vec![baud],
            snr: SnrAxis::Db(vec![snr_db]),
            frame_lengths: vec![103],
            sync_lengths: vec![1],
            stop_rules: StopRules {
                max_sim_frames: 400,
                min_error_packets: 20,
                clean_run_frames: 200,
            },
            duty_bits: 200,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn high_snr_ends_on_clean_run() {
        let cfg = quick(30.0, 10e3);
        let r = run_point(&cfg, &cfg.points()[0]);
        let s = r.stats.unwrap();
        assert_eq!(s.stop_reason, StopReason::CleanRun);
        assert_eq!(s.p_bse, 0.0);
        assert_eq!(s.frames_sent, 200);
        assert!(s.is_accounted());
    }

    #[test]
    fn zero_db_ends_on_errors() {
        let cfg = quick(0.0, 1e6);
        let r = run_point(&cfg, &cfg.points()[0]);
        let s = r.stats.unwrap();
        assert_eq!(s.stop_reason, StopReason::ErrorPackets);
        assert!(s.p_bse > 0.9, "{}", s.p_bse);
        assert!(s.is_accounted());
    }

    #[test]
    fn point_is_deterministic_and_independent() {
        let mut cfg = quick(9.0, 50e3);
        cfg.sync_lengths = vec![1, 5];
        let a = run_point(&cfg, &cfg.points()[1]);
        let b = run_point(&cfg, &cfg.points()[1]);
        assert_eq!(a.stats, b.stats);
        // The same point in a smaller sweep gets the same seed and result.
        cfg.sync_lengths = vec![5];
        let mut p = cfg.points()[0];
        p.index = 1;
        let c = run_point(&cfg, &p);
        assert_eq!(a.seed, c.seed);
        assert_eq!(a.stats, c.stats);
    }

    #[test]
    fn infeasible_point_is_skipped() {
        let mut cfg = quick(10.0, 4e6);
        cfg.max_sample_rate = 10e6;
        let r = run_point(&cfg, &cfg.points()[0]);
        assert!(r.skipped.is_some() && r.stats.is_none());
    }

    #[test]
    fn distance_points_resolve_snr() {
        let mut cfg = quick(0.0, 10e3);
        cfg.snr = SnrAxis::Distance(vec![0.15]);
        let r = run_point(&cfg, &cfg.points()[0]);
        let want = linear_to_db(channel::snr_at_distance(0.15, &cfg.channel).unwrap());
        assert!((r.snr_db.unwrap() - want).abs() < 1e-12);
        assert_eq!(r.point.distance_m, Some(0.15));
    }

    #[test]
    fn points_cross_product_order() {
        let cfg = SweepConfig {
            bauds: vec![1e4, 5e4],
            snr: SnrAxis::Db(vec![3.0, 9.0]),
            frame_lengths: vec![1003],
            sync_lengths: vec![1, 5, 10],
            ..SweepConfig::default()
        };
        let pts = cfg.points();
        assert_eq!(pts.len(), 12);
        assert_eq!((pts[0].baud, pts[0].snr_db, pts[0].sync_len), (1e4, Some(3.0), 1));
        assert_eq!((pts[11].baud, pts[11].snr_db, pts[11].sync_len), (5e4, Some(9.0), 10));
        assert!(pts.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn unwritable_output_fails_before_simulating() {
        let mut cfg = quick(30.0, 10e3);
        cfg.output_path = Some("/nonexistent-dir/out.csv".into());
        assert!(matches!(run_sweep(&cfg), Err(Error::Io { .. })));
    }
}
