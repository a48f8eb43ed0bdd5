//! Lazily evaluated receive chain for a linear front end.
//!
//! With a symmetric one-pole TIA and a plain comparator, the slicer input is
//! the filtered noise-free waveform plus filtered white noise. The receiver
//! only looks at a small fraction of the samples, so [`FastLine`] computes
//! the signal part in closed form per constant-level segment and advances
//! the noise as an AR(1) process directly to the requested index. The joint
//! distribution of the samples that are read is exactly that of the full
//! pipeline with the filter started in its stationary state.

use crate::channel::{bit_boundary, noise_gain, pole, RxFrontEnd};
use crate::error::{Error, Result};
use crate::rng::{normal, SimRng};
use crate::serial::{LineBits, SampledLine};

pub struct FastLine<'a> {
    bits: &'a [u8],
    samples_per_bit: f64,
    len: usize,
    v_on: f64,
    v_off: f64,
    threshold: f64,
    a: f64,
    /// Powers of the pole, `a^k` for small `k`.
    a_pow: Vec<f64>,
    /// Stationary variance of the filtered noise.
    noise_var: f64,
    /// Noise innovation per single sample step.
    step_std: f64,
    cursor: usize,
    signal: f64,
    noise: f64,
    rng: &'a mut SimRng,
}

impl<'a> FastLine<'a> {
    /// `noise_std` is the per-sample standard deviation of the white noise
    /// added before the filter.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bits: &'a LineBits,
        samples_per_bit: f64,
        v_on: f64,
        v_off: f64,
        noise_std: f64,
        fe: &RxFrontEnd,
        sample_rate: f64,
        rng: &'a mut SimRng,
    ) -> Result<Self> {
        fe.validate()?;
        if !fe.is_linear_memoryless() {
            return Err(Error::invalid(
                "lazy sampling needs a symmetric filter and a comparator without hysteresis",
            ));
        }
        if !(samples_per_bit >= 1.0) {
            return Err(Error::invalid("samples_per_bit must be >= 1"));
        }
        let a = pole(fe.tia_bandwidth, sample_rate);
        let bits = bits.as_slice();
        let len = bit_boundary(bits.len(), samples_per_bit);
        let table = (4.0 * samples_per_bit).ceil() as usize + 2;
        let mut a_pow = Vec::with_capacity(table);
        let mut p = 1.0;
        for _ in 0..table {
            a_pow.push(p);
            p *= a;
        }
        let noise_var = noise_std * noise_std * noise_gain(a);
        let first = bits.first().map_or(v_on, |&b| if b != 0 { v_on } else { v_off });
        let noise = noise_var.sqrt() * normal(rng);
        Ok(FastLine {
            bits,
            samples_per_bit,
            len,
            v_on,
            v_off,
            threshold: fe.comparator_ref,
            a,
            a_pow,
            noise_var,
            step_std: (1.0 - a) * noise_std,
            cursor: 0,
            signal: first,
            noise,
            rng,
        })
    }

    #[inline]
    fn a_to(&self, k: usize) -> f64 {
        match self.a_pow.get(k) {
            Some(&v) => v,
            None => self.a.powi(k as i32),
        }
    }

    /// Bit index containing sample `n`.
    #[inline]
    fn bit_of(&self, n: usize) -> usize {
        let mut k = (n as f64 / self.samples_per_bit) as usize;
        while k > 0 && bit_boundary(k, self.samples_per_bit) > n {
            k -= 1;
        }
        while bit_boundary(k + 1, self.samples_per_bit) <= n {
            k += 1;
        }
        k
    }

    fn advance(&mut self, target: usize) {
        let steps = target - self.cursor;
        if steps == 0 {
            return;
        }
        if steps == 1 {
            let x = self.level_of_bit(self.bit_of(target));
            self.signal = self.a * self.signal + (1.0 - self.a) * x;
            self.noise = self.a * self.noise + self.step_std * normal(self.rng);
            self.cursor = target;
            return;
        }
        let mut n = self.cursor;
        while n < target {
            let k = self.bit_of(n + 1);
            let end = bit_boundary(k + 1, self.samples_per_bit).min(target + 1);
            let m = end - (n + 1);
            let x = self.level_of_bit(k);
            self.signal = x + (self.signal - x) * self.a_to(m);
            n += m;
        }
        let decay = self.a_to(steps);
        let fresh = (self.noise_var * (1.0 - decay * decay)).sqrt();
        self.noise = decay * self.noise + fresh * normal(self.rng);
        self.cursor = target;
    }

    #[inline]
    fn level_of_bit(&self, k: usize) -> f64 {
        if self.bits[k] != 0 {
            self.v_on
        } else {
            self.v_off
        }
    }

    /// Slicer input at sample `index`. Indices must not decrease.
    pub fn analog(&mut self, index: usize) -> f64 {
        assert!(index >= self.cursor, "samples must be read in order");
        self.advance(index);
        self.signal + self.noise
    }
}

impl SampledLine for FastLine<'_> {
    fn len(&self) -> usize {
        self.len
    }

    #[inline]
    fn level(&mut self, index: usize) -> bool {
        self.analog(index) > self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{comparator_slice, modulate_ook, tia_lowpass, Waveform};
    use crate::rng::seeded;
    use rand::Rng;

    fn random_bits(n: usize, seed: u64) -> LineBits {
        let mut r = seeded(seed);
        LineBits::from_bits((0..n).map(|_| r.random_range(0..2u8)).collect())
    }

    #[test]
    fn noiseless_matches_full_pipeline() {
        let fe = RxFrontEnd {
            tia_bandwidth: 300e3,
            ..RxFrontEnd::default()
        };
        for sps in [4.0, 16.0, 5.5] {
            let baud = 100e3;
            let fs = sps * baud;
            let bits = random_bits(500, 2);
            let w = modulate_ook(&bits, baud, fs, 1.0, 0.0).unwrap();
            let filtered = tia_lowpass(&w, &fe).unwrap();
            let mut rng = seeded(0);
            let mut fast = FastLine::new(&bits, sps, 1.0, 0.0, 0.0, &fe, fs, &mut rng).unwrap();
            assert_eq!(fast.len(), filtered.len());
            // Sparse, irregular reads.
            let mut i = 0;
            while i < filtered.len() {
                let v = fast.analog(i);
                assert!((v - filtered.samples[i]).abs() < 1e-12, "sps {sps} index {i}");
                i += 1 + (i * 7919) % 23;
            }
        }
    }

    #[test]
    fn noiseless_levels_match_comparator() {
        let fe = RxFrontEnd {
            tia_bandwidth: 1e6,
            ..RxFrontEnd::default()
        };
        let bits = random_bits(300, 4);
        let w = modulate_ook(&bits, 1e5, 1.6e6, 1.0, 0.0).unwrap();
        let sliced = comparator_slice(&tia_lowpass(&w, &fe).unwrap(), &fe);
        let mut rng = seeded(0);
        let mut fast = FastLine::new(&bits, 16.0, 1.0, 0.0, 0.0, &fe, 1.6e6, &mut rng).unwrap();
        for (i, &s) in sliced.iter().enumerate() {
            assert_eq!(fast.level(i), s == 1);
        }
    }

    fn filtered_noise_stats(stride: usize, lag: usize) -> (f64, f64, f64) {
        let fe = RxFrontEnd {
            tia_bandwidth: 1e5,
            ..RxFrontEnd::default()
        };
        let n_bits = 40_000;
        let bits = LineBits::from_bits(vec![0; n_bits]);
        let mut rng = seeded(11);
        let mut fast = FastLine::new(&bits, 16.0, 0.0, 0.0, 1.0, &fe, 1.6e6, &mut rng).unwrap();
        let mut pairs = Vec::new();
        let mut i = 0;
        while i + lag < fast.len() {
            let a = fast.analog(i);
            let b = fast.analog(i + lag);
            pairs.push((a, b));
            i += lag + stride;
        }
        let n = pairs.len() as f64;
        let var = pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / n;
        let cov = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / n;
        (var, cov / var, n)
    }

    #[test]
    fn noise_has_filtered_variance_and_ar1_correlation() {
        let a = pole(1e5, 1.6e6);
        let want_var = noise_gain(a);
        for lag in [1usize, 3, 9] {
            let (var, rho, n) = filtered_noise_stats(40, lag);
            assert!(
                ((var - want_var) / want_var).abs() < 0.03,
                "lag {lag}: var {var} want {want_var}"
            );
            let want_rho = a.powi(lag as i32);
            assert!(
                (rho - want_rho).abs() < 4.0 / n.sqrt(),
                "lag {lag}: rho {rho} want {want_rho}"
            );
        }
    }

    #[test]
    fn stepwise_noise_matches_explicit_filter_variance() {
        // Every sample read one at a time: the noise must follow the same
        // recursion as filtering explicit white noise.
        let fe = RxFrontEnd {
            tia_bandwidth: 2e5,
            ..RxFrontEnd::default()
        };
        let fs = 1.6e6;
        let bits = LineBits::from_bits(vec![1; 20_000]);
        let mut rng = seeded(5);
        let mut fast = FastLine::new(&bits, 16.0, 0.0, 0.0, 0.3, &fe, fs, &mut rng).unwrap();
        let fast_var = (0..fast.len()).map(|i| fast.analog(i).powi(2)).sum::<f64>() / fast.len() as f64;

        let mut r = seeded(6);
        let mut noise = vec![0.0; 320_000];
        crate::rng::add_awgn(&mut noise, 0.3, &mut r);
        let w = Waveform::new(noise, fs).unwrap();
        let full = tia_lowpass(&w, &fe).unwrap();
        let full_var = full.samples.iter().map(|v| v * v).sum::<f64>() / full.len() as f64;
        assert!(
            ((fast_var - full_var) / full_var).abs() < 0.05,
            "{fast_var} vs {full_var}"
        );
    }

    #[test]
    fn rejects_nonlinear_front_end() {
        let bits = LineBits::idle(4);
        let mut rng = seeded(0);
        let fe = RxFrontEnd {
            hysteresis: 0.1,
            ..RxFrontEnd::default()
        };
        assert!(FastLine::new(&bits, 16.0, 1.0, 0.0, 0.1, &fe, 1.6e5, &mut rng).is_err());
    }
}
