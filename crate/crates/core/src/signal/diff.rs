//! Finite-difference derivatives on a uniform grid.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    /// 3-point central, 2nd-order one-sided at the ends.
    Central2,
    /// 5-point central, 4th-order one-sided at the ends.
    #[default]
    Central4,
}

impl DiffScheme {
    pub fn min_len(self) -> usize {
        match self {
            DiffScheme::Central2 => 4,
            DiffScheme::Central4 => 6,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "central2" => Ok(Self::Central2),
            "central4" => Ok(Self::Central4),
            other => Err(Error::Config(format!(
                "unknown differentiation scheme '{other}' (central2 | central4)"
            ))),
        }
    }
}

/// First and second derivative of `y` sampled every `dt`.
pub fn derivatives(y: &[f64], dt: f64, scheme: DiffScheme) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    if n < scheme.min_len() {
        return Err(Error::InvalidInput(format!(
            "differentiation needs at least {} samples, got {n}",
            scheme.min_len()
        )));
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let h = dt;
    let h2 = dt * dt;
    match scheme {
        DiffScheme::Central2 => {
            for i in 1..n - 1 {
                d1[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
                d2[i] = (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2;
            }
            d1[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
            d1[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
            d2[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / h2;
            d2[n - 1] = (2.0 * y[n - 1] - 5.0 * y[n - 2] + 4.0 * y[n - 3] - y[n - 4]) / h2;
        }
        DiffScheme::Central4 => {
            for i in 2..n - 2 {
                d1[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
                d2[i] = (-y[i - 2] + 16.0 * y[i - 1] - 30.0 * y[i] + 16.0 * y[i + 1] - y[i + 2]) / (12.0 * h2);
            }
            let f0 = [-25.0, 48.0, -36.0, 16.0, -3.0];
            let f1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
            let s0 = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
            let s1 = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
            let fwd = |c: &[f64], k: usize| c.iter().enumerate().map(|(j, c)| c * y[k + j]).sum::<f64>();
            let bwd = |c: &[f64], k: usize| c.iter().enumerate().map(|(j, c)| c * y[k - j]).sum::<f64>();
            d1[0] = fwd(&f0, 0) / (12.0 * h);
            d1[1] = fwd(&f1, 0) / (12.0 * h);
            d1[n - 1] = -bwd(&f0, n - 1) / (12.0 * h);
            d1[n - 2] = -bwd(&f1, n - 1) / (12.0 * h);
            d2[0] = fwd(&s0, 0) / (12.0 * h2);
            d2[1] = fwd(&s1, 0) / (12.0 * h2);
            d2[n - 1] = bwd(&s0, n - 1) / (12.0 * h2);
            d2[n - 2] = bwd(&s1, n - 1) / (12.0 * h2);
        }
    }
    Ok((d1, d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central4_exact_on_quartics() {
        let f = |t: f64| 0.5 * t.powi(4) - t.powi(3) + 2.0 * t - 1.0;
        let df = |t: f64| 2.0 * t.powi(3) - 3.0 * t * t + 2.0;
        let ddf = |t: f64| 6.0 * t * t - 6.0 * t;
        let h = 0.1;
        let y: Vec<f64> = (0..12).map(|i| f(i as f64 * h)).collect();
        let (d1, d2) = derivatives(&y, h, DiffScheme::Central4).unwrap();
        for i in 0..12 {
            let t = i as f64 * h;
            assert!((d1[i] - df(t)).abs() < 1e-10, "d1 {i}");
            assert!((d2[i] - ddf(t)).abs() < 1e-8, "d2 {i}");
        }
    }

    #[test]
    fn central2_exact_on_quadratics() {
        let h = 0.2;
        let y: Vec<f64> = (0..7).map(|i| (i as f64 * h).powi(2) * 3.0 - 1.0).collect();
        let (d1, d2) = derivatives(&y, h, DiffScheme::Central2).unwrap();
        for i in 0..7 {
            assert!((d1[i] - 6.0 * i as f64 * h).abs() < 1e-12);
            assert!((d2[i] - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn convergence_order() {
        let err = |h: f64, s: DiffScheme| {
            let y: Vec<f64> = (0..=(1.0 / h) as usize).map(|i| (3.0 * i as f64 * h).sin()).collect();
            let (_, d2) = derivatives(&y, h, s).unwrap();
            let i = y.len() / 2;
            (d2[i] + 9.0 * (3.0 * i as f64 * h).sin()).abs()
        };
        let r2 = err(0.02, DiffScheme::Central2) / err(0.01, DiffScheme::Central2);
        let r4 = err(0.02, DiffScheme::Central4) / err(0.01, DiffScheme::Central4);
        assert!((r2 - 4.0).abs() < 0.2);
        assert!((r4 - 16.0).abs() < 1.0);
    }

    #[test]
    fn too_short() {
        assert!(derivatives(&[0.0; 5], 0.1, DiffScheme::Central4).is_err());
        assert!(derivatives(&[0.0; 4], 0.1, DiffScheme::Central2).is_ok());
    }
}
