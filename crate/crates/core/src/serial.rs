//! UART/TTL serial framing.
//!
//! The line idles high. Each character is a start bit (0), `data_bits` data
//! bits least significant first, an optional parity bit and one or two stop
//! bits (1).
//!
//! The receiver is modelled on common UART hardware: it hunts for a
//! high-to-low transition, re-checks the start bit half a bit later, then
//! samples every following bit at its centre measured from the detected
//! edge. A start bit that reads high at its centre is treated as a false
//! start and hunting resumes. After a character (good or not) hunting
//! resumes at the next high-to-low transition that follows at least one
//! high sample. That re-scan is where stream-level insertions and deletions
//! come from once the line gets noisy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    None,
    Even,
    Odd,
    Mark,
    Space,
}

impl Parity {
    pub fn bits(self) -> usize {
        match self {
            Parity::None => 0,
            _ => 1,
        }
    }

    /// Parity bit for `data`; `None` when parity is disabled.
    pub fn bit_for(self, data: u8) -> Option<u8> {
        let ones = data.count_ones() as u8 & 1;
        match self {
            Parity::None => None,
            Parity::Even => Some(ones),
            Parity::Odd => Some(ones ^ 1),
            Parity::Mark => Some(1),
            Parity::Space => Some(0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "n" => Ok(Parity::None),
            "even" | "e" => Ok(Parity::Even),
            "odd" | "o" => Ok(Parity::Odd),
            "mark" | "m" => Ok(Parity::Mark),
            "space" | "s" => Ok(Parity::Space),
            other => Err(Error::invalid(format!("unknown parity '{other}'"))),
        }
    }

    pub const ALL: [Parity; 5] = [Parity::None, Parity::Even, Parity::Odd, Parity::Mark, Parity::Space];
}

/// Serialization parameters shared by transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UartConfig {
    pub data_bits: u8,
    pub parity: Parity,
    pub stop_bits: u8,
    /// Symbols per second.
    pub baud: f64,
    /// Receiver samples per bit.
    pub oversample: u32,
}

impl Default for UartConfig {
    /// 8N1 at 10 kbaud, 16x oversampling.
    fn default() -> Self {
        UartConfig {
            data_bits: 8,
            parity: Parity::None,
            stop_bits: 1,
            baud: 10_000.0,
            oversample: 16,
        }
    }
}

impl UartConfig {
    pub fn new(data_bits: u8, parity: Parity, stop_bits: u8, baud: f64, oversample: u32) -> Result<Self> {
        let cfg = UartConfig {
            data_bits,
            parity,
            stop_bits,
            baud,
            oversample,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.data_bits, 7 | 8) {
            return Err(Error::invalid(format!(
                "data_bits must be 7 or 8, got {}",
                self.data_bits
            )));
        }
        if !matches!(self.stop_bits, 1 | 2) {
            return Err(Error::invalid(format!(
                "stop_bits must be 1 or 2, got {}",
                self.stop_bits
            )));
        }
        if self.oversample < 4 {
            return Err(Error::invalid(format!(
                "oversample must be >= 4, got {}",
                self.oversample
            )));
        }
        if !(self.baud.is_finite() && self.baud > 0.0) {
            return Err(Error::invalid(format!("baud must be positive, got {}", self.baud)));
        }
        Ok(())
    }

    /// Line positions occupied by one character.
    pub fn bits_per_char(&self) -> usize {
        1 + usize::from(self.data_bits) + self.parity.bits() + usize::from(self.stop_bits)
    }

    pub fn with_baud(mut self, baud: f64) -> Self {
        self.baud = baud;
        self
    }
}

/// Binary line levels, one entry per bit period. 1 is idle/high.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineBits {
    bits: Vec<u8>,
}

impl LineBits {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        LineBits {
            bits: bits.into_iter().map(|b| u8::from(b != 0)).collect(),
        }
    }

    pub fn idle(n: usize) -> Self {
        LineBits { bits: vec![1; n] }
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.bits
    }

    /// Duration in bit periods.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push_idle(&mut self, n: usize) {
        self.bits.resize(self.bits.len() + n, 1);
    }

    /// Surrounds the bits with `lead` and `tail` idle periods.
    pub fn padded(&self, lead: usize, tail: usize) -> LineBits {
        let mut bits = Vec::with_capacity(self.bits.len() + lead + tail);
        bits.resize(lead, 1);
        bits.extend_from_slice(&self.bits);
        bits.resize(bits.len() + tail, 1);
        LineBits { bits }
    }
}

pub fn uart_encode(bytes: &[u8], cfg: &UartConfig) -> Result<LineBits> {
    cfg.validate()?;
    let mut bits = Vec::with_capacity(bytes.len() * cfg.bits_per_char());
    encode_into(bytes, cfg, &mut bits)?;
    Ok(LineBits { bits })
}

/// Appends the line bits for `bytes` to `out`.
pub fn encode_into(bytes: &[u8], cfg: &UartConfig, out: &mut Vec<u8>) -> Result<()> {
    encode_gapped(bytes, cfg, 0, out)
}

/// Like [`encode_into`] but follows every character with `gap_bits` idle
/// bits.
pub fn encode_gapped(bytes: &[u8], cfg: &UartConfig, gap_bits: usize, out: &mut Vec<u8>) -> Result<()> {
    let limit = 1u16 << cfg.data_bits;
    for &byte in bytes {
        if u16::from(byte) >= limit {
            return Err(Error::invalid(format!(
                "byte {byte} does not fit in {} data bits",
                cfg.data_bits
            )));
        }
        out.push(0);
        for k in 0..cfg.data_bits {
            out.push((byte >> k) & 1);
        }
        if let Some(p) = cfg.parity.bit_for(byte) {
            out.push(p);
        }
        for _ in 0..usize::from(cfg.stop_bits) + gap_bits {
            out.push(1);
        }
    }
    Ok(())
}

/// Per-character receive flags. A character with neither flag set is ok.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharFlags {
    pub framing_error: bool,
    pub parity_error: bool,
}

impl CharFlags {
    pub fn is_ok(&self) -> bool {
        !self.framing_error && !self.parity_error
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decoded {
    pub bytes: Vec<u8>,
    pub flags: Vec<CharFlags>,
}

impl Decoded {
    pub fn all_ok(&self) -> bool {
        self.flags.iter().all(CharFlags::is_ok)
    }
}

/// A binary line the receiver can sample.
///
/// Indices passed to `level` are nondecreasing over one decode, which lets
/// implementations generate samples lazily.
pub trait SampledLine {
    fn len(&self) -> usize;
    fn level(&mut self, index: usize) -> bool;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A fully materialised line; any nonzero sample is high.
pub struct SliceLine<'a>(pub &'a [u8]);

impl SampledLine for SliceLine<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    fn level(&mut self, index: usize) -> bool {
        self.0[index] != 0
    }
}

/// UART receiver state shared by every line representation.
#[derive(Debug, Clone, Copy)]
pub struct UartReceiver {
    cfg: UartConfig,
    /// Receiver bit period measured in line samples.
    period: f64,
}

impl UartReceiver {
    /// `clock_skew_ppm > 0` means the receiver clock runs fast, so it
    /// samples each bit earlier than the transmitter intended.
    pub fn new(cfg: &UartConfig, clock_skew_ppm: i32) -> Result<Self> {
        cfg.validate()?;
        let skew = f64::from(clock_skew_ppm) * 1e-6;
        if skew <= -1.0 {
            return Err(Error::invalid("clock skew must be above -1e6 ppm"));
        }
        Ok(UartReceiver {
            cfg: *cfg,
            period: f64::from(cfg.oversample) / (1.0 + skew),
        })
    }

    #[inline]
    fn offset(&self, bit_position: f64) -> usize {
        (bit_position * self.period).round() as usize
    }

    /// Decodes every complete character on `line`, calling `emit` for each.
    /// A character cut off by the end of the line is discarded.
    pub fn run<L: SampledLine, F: FnMut(u8, CharFlags)>(&self, line: &mut L, mut emit: F) {
        let n = line.len();
        let data_bits = usize::from(self.cfg.data_bits);
        let parity_bits = self.cfg.parity.bits();
        let start_off = self.offset(0.5);
        let data_offs: Vec<usize> = (0..data_bits).map(|k| self.offset(k as f64 + 1.5)).collect();
        let parity_off = self.offset(data_bits as f64 + 1.5);
        let stop_off = self.offset((data_bits + parity_bits) as f64 + 1.5);

        let mut i = 0usize;
        let mut seen_high = false;
        loop {
            while i < n {
                if line.level(i) {
                    seen_high = true;
                } else if seen_high {
                    break;
                }
                i += 1;
            }
            if i >= n {
                return;
            }
            let edge = i;
            let mid = edge + start_off;
            if mid >= n {
                return;
            }
            if line.level(mid) {
                // False start.
                i = mid + 1;
                seen_high = true;
                continue;
            }
            if edge + stop_off >= n {
                return;
            }
            let mut byte = 0u8;
            for (k, &off) in data_offs.iter().enumerate() {
                if line.level(edge + off) {
                    byte |= 1 << k;
                }
            }
            let mut flags = CharFlags::default();
            if let Some(expected) = self.cfg.parity.bit_for(byte) {
                let got = u8::from(line.level(edge + parity_off));
                flags.parity_error = got != expected;
            }
            let stop_high = line.level(edge + stop_off);
            flags.framing_error = !stop_high;
            emit(byte, flags);
            i = edge + stop_off + 1;
            seen_high = stop_high;
        }
    }

    pub fn decode<L: SampledLine>(&self, line: &mut L) -> Decoded {
        let mut out = Decoded::default();
        self.run(line, |b, f| {
            out.bytes.push(b);
            out.flags.push(f);
        });
        out
    }
}

/// Decodes a sampled binary line (nonzero = high) taken at `oversample`
/// samples per transmitted bit.
pub fn uart_decode(samples: &[u8], cfg: &UartConfig, clock_skew_ppm: i32) -> Result<Decoded> {
    let rx = UartReceiver::new(cfg, clock_skew_ppm)?;
    Ok(rx.decode(&mut SliceLine(samples)))
}

/// Repeats every line bit `samples_per_bit` times.
pub fn oversample_bits(bits: &LineBits, samples_per_bit: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(bits.len() * samples_per_bit);
    for &b in bits.as_slice() {
        out.resize(out.len() + samples_per_bit, b);
    }
    out
}
