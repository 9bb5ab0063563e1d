//! Interpolation on uniform grids.

use crate::error::{Error, Result};

/// Not-a-knot cubic spline through uniformly spaced samples.
///
/// Outside the sample range the end polynomials are extended.
#[derive(Debug, Clone)]
pub struct UniformSpline {
    t0: f64,
    dt: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(t0: f64, dt: f64, y: &[f64]) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidInput("spline grid step must be positive".into()));
        }
        if y.len() < 2 {
            return Err(Error::InvalidInput("spline needs at least 2 samples".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("spline samples must be finite".into()));
        }
        Ok(Self {
            t0,
            dt,
            y: y.to_vec(),
            m: second_derivatives(y, dt),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.y.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.y.len();
        let u = (t - self.t0) / self.dt;
        let i = (u.floor().max(0.0) as usize).min(n - 2);
        (i, u - i as f64)
    }

    /// Value, first and second derivative at `t`.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let (i, s) = self.locate(t);
        let h = self.dt;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let r = 1.0 - s;
        let v = r * y0 + s * y1 + h * h / 6.0 * ((r * r * r - r) * m0 + (s * s * s - s) * m1);
        let d = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * r * r) * m0 + (3.0 * s * s - 1.0) * m1);
        let dd = r * m0 + s * m1;
        (v, d, dd)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_all(t).1
    }
}

fn second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n == 2 {
        return m;
    }
    let r: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                0.0
            } else {
                6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h)
            }
        })
        .collect();
    if n == 3 {
        m.fill(r[1] / 6.0);
        return m;
    }
    // not-a-knot folds the end rows into m[1] and m[n-2] directly
    m[1] = r[1] / 6.0;
    m[n - 2] = r[n - 2] / 6.0;
    let lo = 2;
    let hi = n - 3;
    if lo <= hi {
        let k = hi - lo + 1;
        let mut diag = vec![4.0; k];
        let mut rhs: Vec<f64> = r[lo..=hi].to_vec();
        rhs[0] -= m[1];
        rhs[k - 1] -= m[n - 2];
        for j in 1..k {
            let w = 1.0 / diag[j - 1];
            diag[j] -= w;
            rhs[j] -= w * rhs[j - 1];
        }
        m[hi] = rhs[k - 1] / diag[k - 1];
        for j in (0..k - 1).rev() {
            m[lo + j] = (rhs[j] - m[lo + j + 1]) / diag[j];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Piecewise-linear interpolation on a uniform grid, held constant outside.
#[derive(Debug, Clone)]
pub struct LinearInterp {
    t0: f64,
    dt: f64,
    y: Vec<f64>,
}

impl LinearInterp {
    pub fn new(t0: f64, dt: f64, y: &[f64]) -> Result<Self> {
        if !(dt > 0.0) || y.is_empty() {
            return Err(Error::InvalidInput(
                "linear interpolation needs samples and dt > 0".into(),
            ));
        }
        Ok(Self { t0, dt, y: y.to_vec() })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.y.len();
        let u = (t - self.t0) / self.dt;
        if u <= 0.0 || n == 1 {
            return self.y[0];
        }
        if u >= (n - 1) as f64 {
            return self.y[n - 1];
        }
        let i = u.floor() as usize;
        let s = u - i as f64;
        self.y[i] + s * (self.y[i + 1] - self.y[i])
    }
}

/// Resamples `y` (uniform on `[0, 1]`) to `n` uniform points with a not-a-knot spline.
pub fn resample(y: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("resampling needs at least 2 points".into()));
    }
    let sp = UniformSpline::new(0.0, 1.0 / (y.len().max(2) - 1) as f64, y)?;
    Ok((0..n).map(|i| sp.eval(i as f64 / (n - 1) as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |t: f64| 0.3 * t * t * t - t * t + 2.0 * t - 1.0;
        let y: Vec<f64> = (0..9).map(|i| f(0.25 * i as f64)).collect();
        let sp = UniformSpline::new(0.0, 0.25, &y).unwrap();
        for k in 0..80 {
            let t = k as f64 * 0.0271;
            let (v, d, dd) = sp.eval_all(t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((d - (0.9 * t * t - 2.0 * t + 2.0)).abs() < 1e-11);
            assert!((dd - (1.8 * t - 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn small_sizes() {
        let sp = UniformSpline::new(0.0, 1.0, &[1.0, 3.0]).unwrap();
        assert_eq!(sp.eval(0.5), 2.0);
        let sp = UniformSpline::new(0.0, 1.0, &[0.0, 1.0, 4.0]).unwrap();
        assert!((sp.eval(1.5) - 2.25).abs() < 1e-14);
        let sp = UniformSpline::new(0.0, 1.0, &[0.0, 1.0, 8.0, 27.0]).unwrap();
        assert!((sp.eval(2.5) - 15.625).abs() < 1e-12);
        assert!(UniformSpline::new(0.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn interpolates_samples() {
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.4).sin()).collect();
        let sp = UniformSpline::new(1.0, 0.1, &y).unwrap();
        for (i, v) in y.iter().enumerate() {
            assert!((sp.eval(1.0 + 0.1 * i as f64) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_holds_ends() {
        let li = LinearInterp::new(0.0, 0.5, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(li.eval(-1.0), 0.0);
        assert_eq!(li.eval(0.25), 0.5);
        assert_eq!(li.eval(0.75), 0.5);
        assert_eq!(li.eval(3.0), 0.0);
    }

    #[test]
    fn resample_endpoints() {
        let y: Vec<f64> = (0..11).map(|i| i as f64 * i as f64).collect();
        let r = resample(&y, 21).unwrap();
        assert_eq!(r.len(), 21);
        assert!((r[0] - 0.0).abs() < 1e-12 && (r[20] - 100.0).abs() < 1e-10);
        assert!((r[1] - 0.25).abs() < 1e-10);
    }
}
