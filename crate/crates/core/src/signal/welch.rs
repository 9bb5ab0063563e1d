//! Welch-averaged spectral densities and frequency-response estimation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment: usize,
    pub overlap: usize,
    pub fs: f64,
}

/// Frequency response estimate `H = S_xy / S_xx` on the one-sided grid.
#[derive(Debug, Clone)]
pub struct Frf {
    pub freq: Vec<f64>,
    pub h: Vec<Complex64>,
    pub coherence: Vec<f64>,
    pub segments: usize,
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

type Spectra = (Vec<f64>, Vec<f64>, Vec<Complex64>, usize);

/// Averaged auto- and cross-spectra `(S_xx, S_yy, S_xy)` with `S_xy = conj(X) Y`.
/// Scaling is common to all three and cancels in ratios.
pub fn spectra(x: &[f64], y: &[f64], cfg: &WelchConfig) -> Result<Spectra> {
    let n = cfg.segment;
    if x.len() != y.len() {
        return Err(Error::InvalidInput("input and output lengths differ".into()));
    }
    if n < 4 || cfg.overlap >= n {
        return Err(Error::InvalidInput("segment must be >= 4 and overlap < segment".into()));
    }
    let step = n - cfg.overlap;
    if x.len() < n + step {
        return Err(Error::InvalidInput(format!(
            "series of {} samples is shorter than two segments of {n}",
            x.len()
        )));
    }
    let win = hann(n);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut sxx = vec![0.0; bins];
    let mut syy = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut count = 0;
    let mut start = 0;
    let prep = |s: &[f64]| -> Vec<Complex64> {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter()
            .zip(&win)
            .map(|(v, w)| Complex64::new((v - m) * w, 0.0))
            .collect()
    };
    while start + n <= x.len() {
        let mut bx = prep(&x[start..start + n]);
        let mut by = prep(&y[start..start + n]);
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..bins {
            sxx[k] += bx[k].norm_sqr();
            syy[k] += by[k].norm_sqr();
            sxy[k] += bx[k].conj() * by[k];
        }
        count += 1;
        start += step;
    }
    Ok((sxx, syy, sxy, count))
}

pub fn frf_welch(input: &[f64], output: &[f64], cfg: &WelchConfig) -> Result<Frf> {
    let (sxx, syy, sxy, segments) = spectra(input, output, cfg)?;
    let peak = sxx.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::InvalidInput("input has no power".into()));
    }
    let floor = peak * 1e-20;
    let n = cfg.segment as f64;
    let mut freq = Vec::new();
    let mut h = Vec::new();
    let mut coherence = Vec::new();
    for k in 0..sxx.len() {
        freq.push(k as f64 * cfg.fs / n);
        if sxx[k] > floor {
            h.push(sxy[k] / sxx[k]);
            coherence.push(sxy[k].norm_sqr() / (sxx[k] * syy[k]).max(f64::MIN_POSITIVE));
        } else {
            h.push(Complex64::new(f64::NAN, f64::NAN));
            coherence.push(f64::NAN);
        }
    }
    Ok(Frf {
        freq,
        h,
        coherence,
        segments,
    })
}

impl Frf {
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.h.iter().map(|h| 20.0 * h.norm().log10()).collect()
    }

    /// Mean gain over bins `lo..=hi`.
    pub fn low_frequency_gain(&self, lo: usize, hi: usize) -> f64 {
        let v: Vec<f64> = self.h[lo..=hi.min(self.h.len() - 1)]
            .iter()
            .map(|h| h.norm())
            .filter(|v| v.is_finite())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// First frequency above bin `lo` where the gain falls 3 dB below the
    /// low-frequency gain, interpolated linearly in dB between bins.
    /// `None` when no crossing occurs below `f_max`.
    pub fn bandwidth(&self, lo: usize, hi: usize, f_max: f64) -> Option<f64> {
        let ref_db = 20.0 * self.low_frequency_gain(lo, hi).log10();
        let target = ref_db - 20.0 * 2f64.sqrt().log10();
        let db = self.magnitude_db();
        for k in lo + 1..self.freq.len() {
            if self.freq[k] > f_max {
                break;
            }
            if db[k].is_finite() && db[k] < target {
                let (f0, f1) = (self.freq[k - 1], self.freq[k]);
                let (g0, g1) = (db[k - 1], db[k]);
                if !g0.is_finite() || g0 == g1 {
                    return Some(f1);
                }
                return Some(f0 + (target - g0) / (g1 - g0) * (f1 - f0));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_system() {
        let x = noise(30_000, 1);
        let cfg = WelchConfig {
            segment: 5000,
            overlap: 50,
            fs: 1000.0,
        };
        let frf = frf_welch(&x, &x, &cfg).unwrap();
        for h in &frf.h[1..] {
            assert!((h.norm() - 1.0).abs() < 1e-9);
        }
        assert_eq!(frf.bandwidth(2, 10, 500.0), None);
        assert_eq!(frf.segments, 6);
    }

    #[test]
    fn pure_gain_and_delay() {
        let x = noise(20_000, 2);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let cfg = WelchConfig {
            segment: 1000,
            overlap: 500,
            fs: 1000.0,
        };
        let frf = frf_welch(&x, &y, &cfg).unwrap();
        assert!((frf.low_frequency_gain(2, 10) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_short_or_silent() {
        let cfg = WelchConfig {
            segment: 100,
            overlap: 50,
            fs: 100.0,
        };
        assert!(frf_welch(&[0.0; 120], &[0.0; 120], &cfg).is_err());
        assert!(frf_welch(&[1.0; 400], &[0.0; 400], &cfg).is_err());
    }
}
