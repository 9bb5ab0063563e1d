use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub c: f64,
    /// Numerator time constant (s).
    pub k_a: f64,
    /// Virtual inertia (kg·m²).
    pub i_v: f64,
    /// Virtual damping (N·m·s/rad).
    pub b_v: f64,
    /// Cutoff of the perturbation low-pass H_F (Hz).
    pub hf_cutoff: f64,
    pub hf_order: usize,
    pub sample_rate: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            c: 0.5,
            k_a: 0.017,
            i_v: 0.2,
            b_v: 3.0,
            hf_cutoff: 30.0,
            hf_order: 2,
            sample_rate: 1000.0,
        }
    }
}

impl ControllerParams {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let p = Self {
            c: cfg.f64_or("controller.c", d.c)?,
            k_a: cfg.f64_or("controller.k_a", d.k_a)?,
            i_v: cfg.f64_or("controller.i_v", d.i_v)?,
            b_v: cfg.f64_or("controller.b_v", d.b_v)?,
            hf_cutoff: cfg.f64_or("controller.hf_cutoff", d.hf_cutoff)?,
            hf_order: cfg.usize_or("controller.hf_order", d.hf_order)?,
            sample_rate: cfg.f64_or("controller.sample_rate", d.sample_rate)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let v = [self.c, self.k_a, self.i_v, self.b_v, self.hf_cutoff, self.sample_rate];
        if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) || self.hf_order == 0 {
            return Err(Error::Config("controller parameters must be positive".into()));
        }
        if self.hf_cutoff >= 0.5 * self.sample_rate {
            return Err(Error::Config(
                "controller.hf_cutoff must be below the Nyquist frequency".into(),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// `θ̇_d = c (K_a s + 1) / (I_v s + B_v) · τ_in`, discretized with the
/// bilinear transform.
#[derive(Debug, Clone)]
pub struct Admittance {
    b: [f64; 2],
    a1: f64,
    x1: f64,
    y1: f64,
}

impl Admittance {
    pub fn new(p: &ControllerParams) -> Self {
        let k = 2.0 * p.sample_rate;
        let (b1, b0) = (p.c * p.k_a, p.c);
        let (a1, a0) = (p.i_v, p.b_v);
        let n = a1 * k + a0;
        Self {
            b: [(b1 * k + b0) / n, (b0 - b1 * k) / n],
            a1: (a0 - a1 * k) / n,
            x1: 0.0,
            y1: 0.0,
        }
    }

    /// Desired angular velocity (rad/s) for the interaction torque `tau_in` (N·m).
    pub fn step(&mut self, tau_in: f64) -> f64 {
        let y = self.b[0] * tau_in + self.b[1] * self.x1 - self.a1 * self.y1;
        self.x1 = tau_in;
        self.y1 = y;
        y
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.y1 = 0.0;
    }

    /// Continuous-time `H_C(j 2π f)`.
    pub fn continuous_response(p: &ControllerParams, f: f64) -> rustfft::num_complex::Complex64 {
        use rustfft::num_complex::Complex64;
        let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f);
        p.c * (p.k_a * s + 1.0) / (p.i_v * s + p.b_v)
    }

    /// Frequency response of the discrete filter at `f` Hz.
    pub fn discrete_response(&self, f: f64, fs: f64) -> rustfft::num_complex::Complex64 {
        use rustfft::num_complex::Complex64;
        let z1 = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f / fs);
        (self.b[0] + self.b[1] * z1) / (1.0 + self.a1 * z1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_value() {
        let p = ControllerParams::default();
        let mut h = Admittance::new(&p);
        let mut y = 0.0;
        for _ in 0..20_000 {
            y = h.step(1.0);
        }
        assert!((y - p.c / p.b_v).abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out_and_linearity() {
        let p = ControllerParams::default();
        let mut h = Admittance::new(&p);
        assert!((0..100).all(|_| h.step(0.0) == 0.0));
        let input: Vec<f64> = (0..300).map(|i| (i as f64 * 0.07).sin() + 0.3).collect();
        let mut h1 = Admittance::new(&p);
        let mut h2 = Admittance::new(&p);
        for x in input {
            let (a, b) = (h1.step(x), h2.step(-2.5 * x));
            assert!((b + 2.5 * a).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn bilinear_matches_continuous_to_50_hz() {
        let p = ControllerParams::default();
        let h = Admittance::new(&p);
        for i in 1..=100 {
            let f = 0.5 * i as f64;
            let c = Admittance::continuous_response(&p, f).norm();
            let d = h.discrete_response(f, p.sample_rate).norm();
            assert!((d / c - 1.0).abs() < 0.02, "{f} Hz: {d} vs {c}");
        }
    }
}
