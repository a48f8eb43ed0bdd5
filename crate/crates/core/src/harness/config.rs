//! Flat `key = value` sweep configuration.
//!
//! One assignment per line. `#` starts a comment. List values are comma
//! separated. Keys not given keep their defaults; unknown or repeated keys
//! are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, RxFrontEnd};
use crate::error::{Error, Result};
use crate::framing::FrameSpec;
use crate::serial::{Parity, UartConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!(
                "unknown format {other:?}, expected csv or json"
            ))),
        }
    }
}

/// The link quality axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrAxis {
    /// Target electrical SNR in dB; the noise is set to match.
    Db(Vec<f64>),
    /// Transmitter-receiver distance in metres; SNR follows from the
    /// channel parameters.
    Distance(Vec<f64>),
}

impl SnrAxis {
    pub fn len(&self) -> usize {
        match self {
            SnrAxis::Db(v) | SnrAxis::Distance(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRules {
    pub max_sim_frames: u64,
    /// Stop once this many frames were received with substitutions, or
    /// this many were dropped.
    pub min_error_packets: u64,
    /// Stop after this many consecutive clean frames.
    pub clean_run_frames: u64,
}

impl Default for StopRules {
    fn default() -> Self {
        StopRules {
            max_sim_frames: 50_000,
            min_error_packets: 100,
            clean_run_frames: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub bauds: Vec<f64>,
    pub snr: SnrAxis,
    /// ID plus payload symbols.
    pub frame_lengths: Vec<usize>,
    pub sync_lengths: Vec<usize>,
    pub uart: UartConfig,
    /// Idle bits the transmitter leaves after every character.
    pub char_gap_bits: usize,
    pub clock_skew_ppm: i32,
    pub channel: ChannelParams,
    pub include_nlos: bool,
    pub front_end: RxFrontEnd,
    /// Template for sync symbol, ID width, alphabet and payload seed.
    pub frame: FrameSpec,
    pub stop_rules: StopRules,
    pub base_seed: u64,
    pub workers: usize,
    /// Frames per simulated transmission burst.
    pub batch_frames: usize,
    /// Points needing a faster receiver sample clock are skipped.
    pub max_sample_rate: f64,
    /// Substitution counts at or above this share the last histogram bin.
    pub hist_overflow: usize,
    /// Bits passed through the full waveform pipeline for the duty column.
    pub duty_bits: usize,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bauds: vec![10e3],
            snr: SnrAxis::Db(vec![12.0]),
            frame_lengths: vec![1003],
            sync_lengths: vec![1],
            uart: UartConfig::default(),
            char_gap_bits: 0,
            clock_skew_ppm: 0,
            channel: ChannelParams::default(),
            include_nlos: false,
            front_end: RxFrontEnd::default(),
            frame: FrameSpec::default(),
            stop_rules: StopRules::default(),
            base_seed: 1,
            workers: 1,
            batch_frames: 16,
            max_sample_rate: 1e9,
            hist_overflow: 50,
            duty_bits: 2_000,
            output_path: None,
            format: Format::Csv,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bauds.is_empty() || self.snr.is_empty() || self.frame_lengths.is_empty() || self.sync_lengths.is_empty()
        {
            return Err(Error::invalid(
                "bauds, SNR/distance, frame_lengths and sync_lengths must be nonempty",
            ));
        }
        if let Some(b) = self.bauds.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::invalid(format!("baud must be positive, got {b}")));
        }
        match &self.snr {
            SnrAxis::Db(v) => {
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::invalid(format!("snr_db must be finite, got {x}")));
                }
            }
            SnrAxis::Distance(v) => {
                if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(Error::invalid(format!("distance must be positive, got {x}")));
                }
            }
        }
        for &f in &self.frame_lengths {
            self.frame.with_frame_len(f)?;
        }
        if self.sync_lengths.contains(&0) {
            return Err(Error::invalid("sync lengths must be >= 1"));
        }
        let s = &self.stop_rules;
        if s.max_sim_frames == 0 || s.min_error_packets == 0 || s.clean_run_frames == 0 {
            return Err(Error::invalid("stop rules must be positive"));
        }
        if self.workers == 0 || self.batch_frames == 0 {
            return Err(Error::invalid("workers and batch_frames must be >= 1"));
        }
        if self.hist_overflow == 0 {
            return Err(Error::invalid("hist_overflow must be >= 1"));
        }
        self.uart.validate()?;
        self.channel.validate()?;
        self.front_end.validate()?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        let mut seen = HashSet::new();
        let mut snr_db: Option<Vec<f64>> = None;
        let mut distances: Option<Vec<f64>> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            let wrap = |e: Error| match e {
                Error::Config { .. } => e,
                other => err(format!("{key}: {other}")),
            };
            match key {
                "bauds" => cfg.bauds = list(value).map_err(wrap)?,
                "snrs_db" => snr_db = Some(list(value).map_err(wrap)?),
                "distances_m" => distances = Some(list(value).map_err(wrap)?),
                "frame_lengths" => cfg.frame_lengths = list(value).map_err(wrap)?,
                "sync_lengths" => cfg.sync_lengths = list(value).map_err(wrap)?,
                "data_bits" => cfg.uart.data_bits = scalar(value).map_err(wrap)?,
                "parity" => cfg.uart.parity = Parity::parse(value).map_err(wrap)?,
                "stop_bits" => cfg.uart.stop_bits = scalar(value).map_err(wrap)?,
                "oversample" => cfg.uart.oversample = scalar(value).map_err(wrap)?,
                "char_gap_bits" => cfg.char_gap_bits = scalar(value).map_err(wrap)?,
                "clock_skew_ppm" => cfg.clock_skew_ppm = scalar(value).map_err(wrap)?,
                "area_rx" => cfg.channel.area_rx = scalar(value).map_err(wrap)?,
                "half_angle" => cfg.channel.half_angle = scalar(value).map_err(wrap)?,
                "theta" => cfg.channel.theta = scalar(value).map_err(wrap)?,
                "psi" => cfg.channel.psi = scalar(value).map_err(wrap)?,
                "psi_c" => cfg.channel.psi_c = scalar(value).map_err(wrap)?,
                "d1" => cfg.channel.d1 = scalar(value).map_err(wrap)?,
                "d2" => cfg.channel.d2 = scalar(value).map_err(wrap)?,
                "alpha" => cfg.channel.alpha = scalar(value).map_err(wrap)?,
                "beta" => cfg.channel.beta = scalar(value).map_err(wrap)?,
                "area_reflector" => cfg.channel.area_reflector = scalar(value).map_err(wrap)?,
                "rho" => cfg.channel.rho = scalar(value).map_err(wrap)?,
                "tx_power" => cfg.channel.tx_power = scalar(value).map_err(wrap)?,
                "responsivity_gain" => cfg.channel.responsivity_gain = scalar(value).map_err(wrap)?,
                "noise_power" => cfg.channel.noise_power = scalar(value).map_err(wrap)?,
                "include_nlos" => cfg.include_nlos = boolean(value).map_err(wrap)?,
                "tia_bandwidth" => cfg.front_end.tia_bandwidth = scalar(value).map_err(wrap)?,
                "rise_bandwidth" => {
                    cfg.front_end.rise_bandwidth = match value {
                        "none" | "" => None,
                        v => Some(scalar(v).map_err(wrap)?),
                    }
                }
                "comparator_ref" => cfg.front_end.comparator_ref = scalar(value).map_err(wrap)?,
                "hysteresis" => cfg.front_end.hysteresis = scalar(value).map_err(wrap)?,
                "sync_symbol" => cfg.frame.sync_symbol = scalar(value).map_err(wrap)?,
                "id_len" => cfg.frame.id_len = scalar(value).map_err(wrap)?,
                "payload_seed" => cfg.frame.payload_seed = scalar(value).map_err(wrap)?,
                "max_sim_frames" => cfg.stop_rules.max_sim_frames = scalar(value).map_err(wrap)?,
                "min_error_packets" => cfg.stop_rules.min_error_packets = scalar(value).map_err(wrap)?,
                "clean_run_frames" => cfg.stop_rules.clean_run_frames = scalar(value).map_err(wrap)?,
                "base_seed" => cfg.base_seed = scalar(value).map_err(wrap)?,
                "workers" => cfg.workers = scalar(value).map_err(wrap)?,
                "batch_frames" => cfg.batch_frames = scalar(value).map_err(wrap)?,
                "max_sample_rate" => cfg.max_sample_rate = scalar(value).map_err(wrap)?,
                "hist_overflow" => cfg.hist_overflow = scalar(value).map_err(wrap)?,
                "duty_bits" => cfg.duty_bits = scalar(value).map_err(wrap)?,
                "output" => cfg.output_path = Some(PathBuf::from(value)),
                "format" => cfg.format = value.parse().map_err(wrap)?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.snr = match (snr_db, distances) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    line: 0,
                    msg: "give either snrs_db or distances_m, not both".into(),
                })
            }
            (Some(v), None) => SnrAxis::Db(v),
            (None, Some(v)) => SnrAxis::Distance(v),
            (None, None) => cfg.snr,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config {
                line: 0,
                msg: other.to_string(),
            },
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn scalar<T: FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e: T::Err| Error::invalid(format!("cannot parse {s:?}: {e}")))
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',').filter(|p| !p.trim().is_empty()).map(scalar).collect()
}

fn boolean(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("expected a boolean, got {s:?}"))),
    }
}
