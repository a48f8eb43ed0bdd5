//! Comparator duty-cycle study.
//!
//! A slow receiver turn-on stretches every rising edge, so at high baud the
//! comparator output spends much less than half the time high even though
//! the transmitted line is balanced. Moving the comparator reference below
//! the midpoint catches the rising edges earlier and restores the duty
//! cycle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{analog_chain, LinkSetup};
use crate::channel::{comparator_slice, db_to_linear, measure_duty, DutyCycle, RxFrontEnd};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::serial::{uart_encode, UartConfig};

/// Turn-on corner used by the duty study unless overridden.
pub const DEFAULT_RISE_BANDWIDTH: f64 = 85e3;

/// Front end for the duty study: 3 MHz fall, slow rise, plain comparator.
pub fn duty_front_end() -> RxFrontEnd {
    RxFrontEnd {
        rise_bandwidth: Some(DEFAULT_RISE_BANDWIDTH),
        ..RxFrontEnd::default()
    }
}

fn random_chars(n: usize, rng: &mut SimRng) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(64..=126u8)).collect()
}

/// Positive duty of the comparator output for about `bits` line bits of
/// random payload characters.
pub fn random_payload_duty(
    uart: &UartConfig,
    fe: &RxFrontEnd,
    link: &LinkSetup,
    bits: usize,
    rng: &mut SimRng,
) -> Result<DutyCycle> {
    let chars = bits.div_ceil(uart.bits_per_char()).max(1);
    let line = uart_encode(&random_chars(chars, rng), uart)?;
    let analog = analog_chain(&line, uart.baud, fe, link, rng)?;
    measure_duty(&comparator_slice(&analog, fe))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyStudy {
    pub baud: f64,
    pub snr_db: f64,
    pub uart: UartConfig,
    pub front_end: RxFrontEnd,
    pub chars: usize,
    pub seed: u64,
    /// Comparator references to evaluate, in volts on the 0/1 V waveform.
    pub refs: Vec<f64>,
}

impl DutyStudy {
    /// Midpoint down to 0.05 V in 0.01 V steps.
    pub fn new(baud: f64, snr_db: f64) -> Self {
        DutyStudy {
            baud,
            snr_db,
            uart: UartConfig::default().with_baud(baud),
            front_end: duty_front_end(),
            chars: 2_000,
            seed: 1,
            refs: (5..=50).rev().map(|k| f64::from(k) / 100.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyPoint {
    pub comparator_ref: f64,
    pub duty: DutyCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyResult {
    /// Ones density of the transmitted line, percent.
    pub line_ones_pct: f64,
    pub points: Vec<DutyPoint>,
}

/// Filters one noisy random-payload waveform and slices it at every
/// reference in the study. All references see the same waveform.
pub fn duty_sweep(study: &DutyStudy) -> Result<DutyResult> {
    if study.refs.is_empty() {
        return Err(Error::invalid("duty study needs at least one comparator reference"));
    }
    let uart = study.uart.with_baud(study.baud);
    uart.validate()?;
    let link = LinkSetup::new(db_to_linear(study.snr_db), study.baud, &uart, &study.front_end)?;
    let mut r = rng::seeded(study.seed);
    let line = uart_encode(&random_chars(study.chars.max(1), &mut r), &uart)?;
    let ones = line.as_slice().iter().filter(|&&b| b == 1).count();
    let analog = analog_chain(&line, uart.baud, &study.front_end, &link, &mut r)?;
    let points = study
        .refs
        .iter()
        .map(|&comparator_ref| {
            let fe = RxFrontEnd {
                comparator_ref,
                ..study.front_end
            };
            measure_duty(&comparator_slice(&analog, &fe)).map(|duty| DutyPoint { comparator_ref, duty })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DutyResult {
        line_ones_pct: 100.0 * ones as f64 / line.len() as f64,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_reference_never_lowers_duty() {
        let mut s = DutyStudy::new(500e3, 25.0);
        s.chars = 300;
        let r = duty_sweep(&s).unwrap();
        for w in r.points.windows(2) {
            assert!(w[1].duty.positive >= w[0].duty.positive);
        }
    }

    #[test]
    fn slow_baud_is_balanced() {
        let mut s = DutyStudy::new(1e3, 30.0);
        s.chars = 300;
        s.refs = vec![0.5];
        let r = duty_sweep(&s).unwrap();
        assert!((r.points[0].duty.positive - r.line_ones_pct).abs() < 3.0);
    }

    #[test]
    fn empty_refs_rejected() {
        let mut s = DutyStudy::new(1e3, 30.0);
        s.refs.clear();
        assert!(duty_sweep(&s).is_err());
    }
}
