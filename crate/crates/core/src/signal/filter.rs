//! Butterworth design as second-order sections, causal and zero-phase filtering.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Frequency response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Transposed direct-form II state that is at rest for a constant input `x`.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z2 = self.b[2] * x - self.a[2] * y;
        let z1 = self.b[1] * x - self.a[1] * y + z2;
        [z1, z2]
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Digital Butterworth low-pass by bilinear transform with prewarping.
    pub fn butter_lowpass(order: usize, cutoff: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("filter order must be >= 1".into()));
        }
        if !(cutoff > 0.0 && cutoff < fs / 2.0) {
            return Err(Error::InvalidInput(format!(
                "cutoff {cutoff} Hz must lie in (0, {}) Hz",
                fs / 2.0
            )));
        }
        let k = 2.0 * fs;
        let wa = k * (PI * cutoff / fs).tan();
        let mut sections = Vec::new();
        for i in 0..order / 2 {
            let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(wa, theta);
            let zp = (k + p) / (k - p);
            let a = [1.0, -2.0 * zp.re, zp.norm_sqr()];
            let g = (a[0] + a[1] + a[2]) / 4.0;
            sections.push(Biquad { b: [g, 2.0 * g, g], a });
        }
        if order % 2 == 1 {
            let zp = (k - wa) / (k + wa);
            let g = (1.0 - zp) / 2.0;
            sections.push(Biquad {
                b: [g, g, 0.0],
                a: [1.0, -zp, 0.0],
            });
        }
        Ok(Self { sections })
    }

    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * f / fs;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    fn steady_state(&self, x: f64) -> Vec<[f64; 2]> {
        let mut input = x;
        self.sections
            .iter()
            .map(|s| {
                let z = s.steady_state(input);
                input *= s.dc_gain();
                z
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * y + z[1];
                z[1] = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut y, &mut state);
        y
    }

    /// Default edge padding of [`Sos::filtfilt`].
    pub fn default_padlen(&self) -> usize {
        let trailing_zero = |c: &[f64; 3]| c[2] == 0.0;
        let nb = self.sections.iter().filter(|s| trailing_zero(&s.b)).count();
        let na = self.sections.iter().filter(|s| trailing_zero(&s.a)).count();
        3 * (2 * self.sections.len() + 1 - nb.min(na))
    }

    /// Forward-backward filtering with odd extension at both ends and
    /// steady-state initial conditions, giving zero phase and squared magnitude.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.default_padlen();
        let n = x.len();
        if n <= pad {
            return Err(Error::InvalidInput(format!(
                "zero-phase filtering needs more than {pad} samples, got {n}"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut state = self.steady_state(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        let mut state = self.steady_state(ext[0]);
        self.run(&mut ext, &mut state);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Streaming biquad cascade for sample-by-sample loops.
#[derive(Debug, Clone)]
pub struct StreamingSos {
    sos: Sos,
    state: Vec<[f64; 2]>,
}

impl StreamingSos {
    pub fn new(sos: Sos) -> Self {
        let n = sos.sections.len();
        Self {
            sos,
            state: vec![[0.0; 2]; n],
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let mut v = [x];
        self.sos.run(&mut v, &mut self.state);
        v[0]
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|z| *z = [0.0; 2]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_half_power_at_cutoff() {
        for order in 1..=5 {
            let sos = Sos::butter_lowpass(order, 40.0, 128.0).unwrap();
            let g = sos.response(40.0, 128.0).norm();
            assert!((g - 0.5f64.sqrt()).abs() < 1e-12, "order {order}: {g}");
            assert!((sos.response(0.0, 128.0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_reference_coefficients() {
        // second-order, fc = 30 Hz, fs = 1000 Hz
        let sos = Sos::butter_lowpass(2, 30.0, 1000.0).unwrap();
        let s = sos.sections[0];
        assert!((s.b[0] - 0.007_820_208_033_497_193).abs() < 1e-12);
        assert!((s.a[1] + 1.734_725_768_809_275_4).abs() < 1e-12);
        assert!((s.a[2] - 0.766_006_600_943_264).abs() < 1e-12);
    }

    #[test]
    fn filtfilt_keeps_constants_and_lines() {
        let sos = Sos::butter_lowpass(4, 40.0, 128.0).unwrap();
        let c = vec![3.5; 50];
        for v in sos.filtfilt(&c).unwrap() {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn filtfilt_matches_reference_values() {
        let sos = Sos::butter_lowpass(4, 40.0, 128.0).unwrap();
        let x: Vec<f64> = (0..40)
            .map(|i| (i as f64 * 0.3).sin() + 0.01 * (i * i) as f64)
            .collect();
        let y = sos.filtfilt(&x).unwrap();
        let expected = [
            (0, 8.06350825e-05),
            (1, 3.06096689e-01),
            (5, 1.24731016e+00),
            (20, 3.72058884e+00),
            (39, 1.44487449e+01),
        ];
        for (i, v) in expected {
            assert!((y[i] - v).abs() < 1e-8, "sample {i}: {}", y[i]);
        }
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        let fs = 128.0;
        let sos = Sos::butter_lowpass(4, 40.0, fs).unwrap();
        let f = 5.0;
        let x: Vec<f64> = (0..512).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let y = sos.filtfilt(&x).unwrap();
        let gain = sos.response(f, fs).norm_sqr();
        for i in 100..400 {
            assert!((y[i] - gain * x[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn short_input_rejected() {
        let sos = Sos::butter_lowpass(4, 40.0, 128.0).unwrap();
        assert_eq!(sos.default_padlen(), 15);
        assert!(sos.filtfilt(&[0.0; 15]).is_err());
        assert!(Sos::butter_lowpass(2, 70.0, 128.0).is_err());
    }

    #[test]
    fn streaming_matches_batch() {
        let sos = Sos::butter_lowpass(3, 20.0, 500.0).unwrap();
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64).collect();
        let batch = sos.filter(&x);
        let mut st = StreamingSos::new(sos);
        for (xi, yi) in x.iter().zip(&batch) {
            assert!((st.step(*xi) - yi).abs() < 1e-12);
        }
    }
}
