//! Closed-form error probabilities and empirical error distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{erfc, q_function};

fn check_snr(snr: f64) -> Result<()> {
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!("snr must be >= 0, got {snr}")));
    }
    Ok(())
}

/// Bit error probability of OOK with a midpoint slicer, `Q(sqrt(snr))`.
pub fn ber_ook(snr: f64) -> Result<f64> {
    check_snr(snr)?;
    Ok(0.5 * erfc((snr / 2.0).sqrt()))
}

/// Union-bound symbol error rate of an 8-bit character, `8 Q(sqrt(snr))`.
/// Exceeds 1 at low SNR.
pub fn ser_ttl_raw(snr: f64) -> Result<f64> {
    check_snr(snr)?;
    Ok(8.0 * q_function(snr.sqrt()))
}

/// [`ser_ttl_raw`] clamped to a probability.
pub fn ser_ttl(snr: f64) -> Result<f64> {
    ser_ttl_raw(snr).map(|v| v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncProbabilityInputs {
    pub n_sync: u32,
    pub n_payload: u32,
    /// Symbol crossover probability.
    pub p_s: f64,
    pub alphabet_size: u32,
}

impl SyncProbabilityInputs {
    pub fn new(n_sync: u32, n_payload: u32, p_s: f64) -> Self {
        SyncProbabilityInputs {
            n_sync,
            n_payload,
            p_s,
            alphabet_size: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_s) {
            return Err(Error::invalid(format!("p_s must be in [0, 1], got {}", self.p_s)));
        }
        if self.n_sync == 0 || self.n_payload == 0 {
            return Err(Error::invalid("n_sync and n_payload must be >= 1"));
        }
        if self.alphabet_size < 2 {
            return Err(Error::invalid("alphabet_size must be >= 2"));
        }
        Ok(())
    }

    /// Probability that a given symbol turns into one specific other symbol.
    fn p_to_sync(&self) -> f64 {
        self.p_s / f64::from(self.alphabet_size - 1)
    }
}

/// Frame drop probability before clamping: either a sync symbol is hit or a
/// payload symbol becomes the sync symbol.
pub fn p_fail_raw(inp: &SyncProbabilityInputs) -> Result<f64> {
    inp.validate()?;
    Ok(f64::from(inp.n_sync) * inp.p_s + f64::from(inp.n_payload) * inp.p_to_sync())
}

pub fn p_fail(inp: &SyncProbabilityInputs) -> Result<f64> {
    p_fail_raw(inp).map(|v| v.clamp(0.0, 1.0))
}

/// Probability that a false sync word pair appears inside the payload.
pub fn p_err(inp: &SyncProbabilityInputs) -> Result<f64> {
    inp.validate()?;
    let e = 2 * inp.n_sync as i32;
    Ok(f64::from(inp.n_payload) * inp.p_s.powi(e) * inp.p_to_sync().powi(e))
}

/// Substitution-count histogram over transmitted frames.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    /// Substitution count -> number of received frames.
    pub bins: BTreeMap<usize, u64>,
    pub dropped: u64,
    pub total: u64,
}

impl ErrorHistogram {
    pub fn record_received(&mut self, substitutions: usize) {
        *self.bins.entry(substitutions).or_default() += 1;
        self.total += 1;
    }

    pub fn record_dropped(&mut self) {
        self.dropped += 1;
        self.total += 1;
    }

    pub fn received(&self) -> u64 {
        self.bins.values().sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.received() + self.dropped == self.total
    }

    /// Counts with every substitution count `>= overflow_at` merged into the
    /// last entry. The result has `overflow_at + 1` entries.
    pub fn capped_bins(&self, overflow_at: usize) -> Vec<u64> {
        let mut out = vec![0u64; overflow_at + 1];
        for (&k, &n) in &self.bins {
            out[k.min(overflow_at)] += n;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    /// Fraction of received frames with each substitution count.
    pub pdf: BTreeMap<usize, f64>,
    /// Fraction of all transmitted frames received with at most k
    /// substitutions.
    pub cdf: BTreeMap<usize, f64>,
    pub reliability: f64,
}

pub fn histogram_pdf_cdf(h: &ErrorHistogram) -> Result<Distribution> {
    if h.total == 0 {
        return Err(Error::invalid("histogram has no frames"));
    }
    if !h.is_consistent() {
        return Err(Error::invalid(format!(
            "histogram bins ({}) + dropped ({}) != total ({})",
            h.received(),
            h.dropped,
            h.total
        )));
    }
    let received = h.received();
    let total = h.total as f64;
    let mut pdf = BTreeMap::new();
    let mut cdf = BTreeMap::new();
    let mut running = 0u64;
    for (&k, &n) in &h.bins {
        pdf.insert(k, n as f64 / received as f64);
        running += n;
        cdf.insert(k, running as f64 / total);
    }
    Ok(Distribution {
        pdf,
        cdf,
        reliability: 1.0 - h.dropped as f64 / total,
    })
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;
