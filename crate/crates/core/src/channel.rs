//! Optical channel, OOK modulation and the receiver front end.
//!
//! Signal flow: line bits are turned into a rectangular LED drive waveform,
//! scaled by the Lambertian path gain, corrupted by a single additive white
//! Gaussian noise source, band-limited by the transimpedance amplifier and
//! finally sliced by a comparator into a binary line for the UART receiver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::serial::LineBits;

/// Upper bound for [`snr_to_distance`] when the target SNR is tiny.
pub const DEFAULT_MAX_DISTANCE_M: f64 = 100.0;

/// Link geometry, optics and noise. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Effective photodiode collection area, m^2.
    pub area_rx: f64,
    /// Transmitter half-power semi-angle.
    pub half_angle: f64,
    /// Angle of irradiance.
    pub theta: f64,
    /// Angle of incidence.
    pub psi: f64,
    /// Receiver field-of-view cutoff.
    pub psi_c: f64,
    /// Transmitter to receiver distance, m.
    pub d: f64,
    /// Transmitter to reflector distance, m.
    pub d1: f64,
    /// Reflector to receiver distance, m.
    pub d2: f64,
    /// Irradiance angle with respect to the reflector normal.
    pub alpha: f64,
    /// Incidence angle with respect to the reflector normal.
    pub beta: f64,
    /// Effective reflector area, m^2.
    pub area_reflector: f64,
    /// Reflection coefficient in [0, 1].
    pub rho: f64,
    /// Optical transmit power, W.
    pub tx_power: f64,
    /// Lumped optical-to-voltage conversion, V/W.
    pub responsivity_gain: f64,
    /// Optical-referred noise variance at the slicer input.
    pub noise_power: f64,
}

impl Default for ChannelParams {
    /// A 15 cm line-of-sight link with a 120 degree LED inside a dark box.
    /// `noise_power` is calibrated so that this geometry gives 13.88 dB.
    fn default() -> Self {
        ChannelParams {
            area_rx: 7.5e-6,
            half_angle: 60.0,
            theta: 0.0,
            psi: 0.0,
            psi_c: 60.0,
            d: 0.15,
            d1: 0.202,
            d2: 0.202,
            alpha: 30.0,
            beta: 30.0,
            area_reflector: 1e-4,
            rho: 0.1,
            tx_power: 1.0,
            responsivity_gain: 1.0,
            noise_power: 1.152e-10,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("area_rx", self.area_rx),
            ("d", self.d),
            ("d1", self.d1),
            ("d2", self.d2),
            ("area_reflector", self.area_reflector),
            ("tx_power", self.tx_power),
            ("responsivity_gain", self.responsivity_gain),
            ("noise_power", self.noise_power),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho must be in [0, 1], got {}", self.rho)));
        }
        if !(self.half_angle > 0.0 && self.half_angle < 90.0) {
            return Err(Error::invalid(format!(
                "half_angle must be in (0, 90) degrees, got {}",
                self.half_angle
            )));
        }
        Ok(())
    }

    pub fn with_distance(mut self, d: f64) -> Self {
        self.d = d;
        self
    }
}

/// Uniformly sampled signal in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {bad}")));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            });
        hi - lo
    }
}

/// Transimpedance amplifier and comparator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxFrontEnd {
    /// First-order low-pass corner, Hz.
    pub tia_bandwidth: f64,
    /// Slicing threshold, V.
    pub comparator_ref: f64,
    /// Hysteresis band width, V. Zero is a plain comparator.
    pub hysteresis: f64,
    /// Corner used while the output is rising. `None` keeps the filter
    /// symmetric; a lower value models a slow turn-on at the receiver.
    #[serde(default)]
    pub rise_bandwidth: Option<f64>,
}

impl Default for RxFrontEnd {
    fn default() -> Self {
        RxFrontEnd {
            tia_bandwidth: 3.0e6,
            comparator_ref: 0.5,
            hysteresis: 0.0,
            rise_bandwidth: None,
        }
    }
}

impl RxFrontEnd {
    pub fn validate(&self) -> Result<()> {
        if !(self.tia_bandwidth.is_finite() && self.tia_bandwidth > 0.0) {
            return Err(Error::invalid(format!(
                "tia_bandwidth must be positive, got {}",
                self.tia_bandwidth
            )));
        }
        if let Some(r) = self.rise_bandwidth {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid(format!("rise_bandwidth must be positive, got {r}")));
            }
        }
        if !(self.hysteresis.is_finite() && self.hysteresis >= 0.0) {
            return Err(Error::invalid(format!(
                "hysteresis must be >= 0, got {}",
                self.hysteresis
            )));
        }
        if !self.comparator_ref.is_finite() {
            return Err(Error::invalid("comparator_ref must be finite"));
        }
        Ok(())
    }

    /// True when the front end is a linear filter followed by a memoryless
    /// slicer.
    pub fn is_linear_memoryless(&self) -> bool {
        self.hysteresis == 0.0 && self.rise_bandwidth.is_none()
    }
}

fn cos_deg(a: f64) -> f64 {
    a.to_radians().cos()
}

fn check_angle(name: &str, a: f64) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::invalid(format!("{name} must be finite")));
    }
    Ok(())
}

/// Lambertian emission order for a transmitter half-power semi-angle.
pub fn lambertian_order(half_angle_deg: f64) -> Result<f64> {
    if !(half_angle_deg > 0.0 && half_angle_deg < 90.0) {
        return Err(Error::invalid(format!(
            "half angle must be in (0, 90) degrees, got {half_angle_deg}"
        )));
    }
    Ok(-std::f64::consts::LN_2 / cos_deg(half_angle_deg).ln())
}

/// Line-of-sight DC gain. Zero outside the receiver field of view.
pub fn h_los(p: &ChannelParams) -> Result<f64> {
    p.validate()?;
    check_angle("theta", p.theta)?;
    check_angle("psi", p.psi)?;
    if p.d == 0.0 {
        return Err(Error::invalid("h_los: distance must be > 0"));
    }
    if !(0.0..=p.psi_c).contains(&p.psi) {
        return Ok(0.0);
    }
    let m = lambertian_order(p.half_angle)?;
    let cos_theta = cos_deg(p.theta).max(0.0);
    Ok(p.area_rx * (m + 1.0) / (2.0 * PI * p.d * p.d) * cos_theta.powf(m) * cos_deg(p.psi))
}

/// First-order reflection gain.
pub fn h_nlos(p: &ChannelParams) -> Result<f64> {
    p.validate()?;
    for (name, a) in [("theta", p.theta), ("psi", p.psi), ("alpha", p.alpha), ("beta", p.beta)] {
        check_angle(name, a)?;
    }
    if p.d1 == 0.0 || p.d2 == 0.0 {
        return Err(Error::invalid("h_nlos: d1 and d2 must be > 0"));
    }
    let m = lambertian_order(p.half_angle)?;
    let path = PI * p.d1 * p.d2;
    let cos_theta = cos_deg(p.theta).max(0.0);
    Ok(p.area_rx * (m + 1.0) / (2.0 * path * path)
        * cos_theta.powf(m)
        * cos_deg(p.alpha)
        * cos_deg(p.beta)
        * cos_deg(p.psi)
        * p.area_reflector
        * p.rho)
}

/// Largest transmitter-receiver separation inside an enclosure of width `w`
/// for which no first-order wall reflection reaches the receiver.
pub fn max_los_distance(w: f64, alpha_plus_beta_deg: f64, theta_max_deg: f64) -> Result<f64> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::invalid(format!("width must be >= 0, got {w}")));
    }
    if !(theta_max_deg > 0.0 && theta_max_deg <= 90.0) {
        return Err(Error::invalid(format!(
            "theta_max must be in (0, 90] degrees, got {theta_max_deg}"
        )));
    }
    let s = theta_max_deg.to_radians().sin();
    Ok(w / 2.0 * alpha_plus_beta_deg.to_radians().sin() / (s * s))
}

/// Index of the first sample belonging to bit `k` for `samples_per_bit`.
/// Boundaries are computed from `k` directly so fractional spans never drift.
#[inline]
pub fn bit_boundary(k: usize, samples_per_bit: f64) -> usize {
    (k as f64 * samples_per_bit).round() as usize
}

/// Rectangular on-off keyed waveform: `v_on` for a 1, `v_off` for a 0.
pub fn modulate_ook(bits: &LineBits, baud: f64, sample_rate: f64, v_on: f64, v_off: f64) -> Result<Waveform> {
    if !(baud.is_finite() && baud > 0.0) {
        return Err(Error::invalid(format!("baud must be positive, got {baud}")));
    }
    if !(sample_rate.is_finite() && sample_rate >= 4.0 * baud) {
        return Err(Error::invalid(format!(
            "sample_rate {sample_rate} must be at least 4x baud {baud}"
        )));
    }
    let sps = sample_rate / baud;
    let total = bit_boundary(bits.len(), sps);
    let mut samples = Vec::with_capacity(total);
    for (k, &b) in bits.as_slice().iter().enumerate() {
        let end = bit_boundary(k + 1, sps);
        let v = if b != 0 { v_on } else { v_off };
        samples.resize(end, v);
    }
    Waveform::new(samples, sample_rate)
}

/// Total electrical path gain: optical gain times transmit power times the
/// optical-to-voltage conversion.
pub fn path_gain(p: &ChannelParams, include_nlos: bool) -> Result<f64> {
    let mut h = h_los(p)?;
    if include_nlos {
        h += h_nlos(p)?;
    }
    Ok(h * p.tx_power * p.responsivity_gain)
}

/// Scales the drive waveform by the channel and adds Gaussian noise of
/// variance `noise_power * responsivity_gain^2`.
pub fn apply_channel(w: &Waveform, p: &ChannelParams, include_nlos: bool, rng_seed: u64) -> Result<Waveform> {
    let gain = path_gain(p, include_nlos)?;
    let std = p.noise_power.sqrt() * p.responsivity_gain;
    let mut samples: Vec<f64> = w.samples.iter().map(|&s| s * gain).collect();
    let mut rng = rng::seeded(rng_seed);
    rng::add_awgn(&mut samples, std, &mut rng);
    Ok(Waveform {
        samples,
        sample_rate: w.sample_rate,
    })
}

/// Per-sample pole of the discrete one-pole filter `y[n] = a y[n-1] + (1-a) x[n]`
/// whose step response reaches 1 - 1/e after `1 / (2 pi f_c)` seconds.
pub fn pole(corner_hz: f64, sample_rate: f64) -> f64 {
    (-2.0 * PI * corner_hz / sample_rate).exp()
}

/// Ratio of output to input variance for white noise through the one-pole
/// filter.
pub fn noise_gain(a: f64) -> f64 {
    (1.0 - a) / (1.0 + a)
}

/// First-order low-pass. The state starts at the first input sample so a DC
/// input passes unchanged.
pub fn tia_lowpass(w: &Waveform, fe: &RxFrontEnd) -> Result<Waveform> {
    fe.validate()?;
    let a_fall = pole(fe.tia_bandwidth, w.sample_rate);
    let a_rise = fe.rise_bandwidth.map_or(a_fall, |r| pole(r, w.sample_rate));
    let mut out = Vec::with_capacity(w.len());
    let mut y = w.samples.first().copied().unwrap_or(0.0);
    for &x in &w.samples {
        let a = if x > y { a_rise } else { a_fall };
        y = a * y + (1.0 - a) * x;
        out.push(y);
    }
    Ok(Waveform {
        samples: out,
        sample_rate: w.sample_rate,
    })
}

/// Slices the waveform into binary samples (1 above the reference). With a
/// nonzero hysteresis the thresholds are `ref +/- hysteresis/2`.
pub fn comparator_slice(w: &Waveform, fe: &RxFrontEnd) -> Vec<u8> {
    let half = fe.hysteresis / 2.0;
    let rise_at = fe.comparator_ref + half;
    let fall_at = fe.comparator_ref - half;
    let mut high = w.samples.first().is_some_and(|&v| v > fe.comparator_ref);
    w.samples
        .iter()
        .map(|&v| {
            if high {
                if v < fall_at {
                    high = false;
                }
            } else if v > rise_at {
                high = true;
            }
            u8::from(high)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycle {
    /// Percentage of samples at logic high.
    pub positive: f64,
    /// Percentage of samples at logic low.
    pub negative: f64,
}

pub fn measure_duty(samples: &[u8]) -> Result<DutyCycle> {
    if samples.is_empty() {
        return Err(Error::invalid("measure_duty: empty input"));
    }
    let ones = samples.iter().filter(|&&s| s != 0).count();
    let positive = 100.0 * ones as f64 / samples.len() as f64;
    Ok(DutyCycle {
        positive,
        negative: 100.0 - positive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub linear: f64,
    pub db: f64,
    /// Set when the noise-only power is not positive; `linear` is then +inf.
    pub noise_free: bool,
}

/// SNR from the four voltage levels read off a received square wave.
///
/// `v_min0`/`v_min1` bound the noise-only (LED off) region and
/// `v_max0`/`v_max1` the signal-plus-noise (LED on) region. Each region is
/// modelled as a DC level plus a sinusoid of half the spread, giving
/// `P = v0^2 + ((v1 - v0)/2)^2 / 2`; SNR is `(P_SN - P_N) / (2 P_N)`.
pub fn estimate_snr(v_min0: f64, v_max0: f64, v_min1: f64, v_max1: f64) -> Result<SnrEstimate> {
    if ![v_min0, v_max0, v_min1, v_max1].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("estimate_snr: voltages must be finite"));
    }
    let region_power = |v0: f64, v1: f64| {
        let swing = (v1 - v0) / 2.0;
        v0 * v0 + swing * swing / 2.0
    };
    let p_n = region_power(v_min0, v_min1);
    let p_sn = region_power(v_max0, v_max1);
    let p_s = p_sn - p_n;
    if p_s < 0.0 {
        return Err(Error::InvalidMeasurement(format!(
            "signal power {p_s} is negative (P_SN {p_sn} < P_N {p_n})"
        )));
    }
    if p_n <= 0.0 {
        return Ok(SnrEstimate {
            linear: f64::INFINITY,
            db: f64::INFINITY,
            noise_free: true,
        });
    }
    let linear = p_s / (2.0 * p_n);
    Ok(SnrEstimate {
        linear,
        db: 10.0 * linear.log10(),
        noise_free: false,
    })
}

/// Electrical SNR for the configured geometry: with on-off swing
/// `A = P_tx H g` and noise variance `sigma^2 = noise_power g^2`,
/// `SNR = A^2 / (4 sigma^2)`, so a midpoint slicer errs with `Q(sqrt SNR)`.
pub fn received_snr(p: &ChannelParams, include_nlos: bool) -> Result<f64> {
    if p.noise_power <= 0.0 {
        return Err(Error::invalid("noise_power must be > 0 to define an SNR"));
    }
    let mut h = h_los(p)?;
    if include_nlos {
        h += h_nlos(p)?;
    }
    let received = p.tx_power * h;
    Ok(received * received / (4.0 * p.noise_power))
}

/// SNR at distance `d` with transmitter and receiver facing each other.
pub fn snr_at_distance(d: f64, p: &ChannelParams) -> Result<f64> {
    let q = ChannelParams {
        d,
        theta: 0.0,
        psi: 0.0,
        ..*p
    };
    received_snr(&q, false)
}

/// Distance at which the normal-incidence SNR equals `target_snr`,
/// clipped at [`DEFAULT_MAX_DISTANCE_M`].
pub fn snr_to_distance(target_snr: f64, p: &ChannelParams) -> Result<f64> {
    snr_to_distance_within(target_snr, p, DEFAULT_MAX_DISTANCE_M)
}

pub fn snr_to_distance_within(target_snr: f64, p: &ChannelParams, max_distance: f64) -> Result<f64> {
    if !(target_snr.is_finite() && target_snr > 0.0) {
        return Err(Error::invalid(format!("target SNR must be > 0, got {target_snr}")));
    }
    const MIN_DISTANCE: f64 = 1e-4;
    if !(max_distance > MIN_DISTANCE) {
        return Err(Error::invalid(format!("max distance must exceed {MIN_DISTANCE} m")));
    }
    let mut lo = MIN_DISTANCE;
    let mut hi = max_distance;
    if snr_at_distance(lo, p)? < target_snr {
        return Err(Error::OutOfRange(format!(
            "SNR {target_snr} is not reachable even at {MIN_DISTANCE} m"
        )));
    }
    if snr_at_distance(hi, p)? >= target_snr {
        return Ok(hi);
    }
    // SNR falls monotonically with distance.
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if snr_at_distance(mid, p)? >= target_snr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
