//! Bound-constrained nonlinear least squares.
//!
//! Levenberg-Marquardt in box-normalized coordinates with an active set:
//! variables sitting on a bound whose gradient pushes outward are frozen,
//! the damped Gauss-Newton step is solved for the rest and projected back
//! into the box. The Jacobian comes from forward differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
    pub max_iter: usize,
    /// Relative forward-difference step.
    pub diff_step: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-10,
            xtol: 1e-10,
            gtol: 1e-10,
            max_iter: 200,
            diff_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostConverged,
    StepConverged,
    GradientConverged,
    ZeroResidual,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqResult {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    /// Squared 2-norm of the residual.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub at_bound: Vec<bool>,
}

struct Problem<'a, F> {
    f: F,
    lb: &'a [f64],
    ub: &'a [f64],
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> Problem<'_, F> {
    fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lb.iter().zip(self.ub))
            .map(|(z, (l, u))| l + z * (u - l))
            .collect()
    }

    fn eval(&mut self, z: &[f64]) -> Result<DVector<f64>> {
        self.evals += 1;
        let x = self.to_x(z);
        let r = (self.f)(&x)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite residual".into()));
        }
        Ok(DVector::from_vec(r))
    }

    /// Forward-difference Jacobian with respect to the normalized variables;
    /// steps flip to backward differences at the upper bound.
    fn jacobian(&mut self, z: &[f64], r: &DVector<f64>, rel: f64) -> Result<DMatrix<f64>> {
        let n = z.len();
        let mut j = DMatrix::zeros(r.len(), n);
        let x = self.to_x(z);
        for i in 0..n {
            let span = self.ub[i] - self.lb[i];
            let mut h = rel * x[i].abs().max(1.0) / span;
            if z[i] + h > 1.0 {
                h = -h;
            }
            let mut zp = z.to_vec();
            zp[i] += h;
            let h = zp[i] - z[i];
            let rp = self.eval(&zp)?;
            if rp.len() != r.len() {
                return Err(Error::Numerical("residual length changed".into()));
            }
            j.set_column(i, &((rp - r) / h));
        }
        Ok(j)
    }
}

/// Minimizes `||f(x)||²` subject to `lb <= x <= ub` from `x0` (clipped into the box).
pub fn least_squares<F>(f: F, x0: &[f64], lb: &[f64], ub: &[f64], opts: &LsqOptions) -> Result<LsqResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if lb.len() != n || ub.len() != n || n == 0 {
        return Err(Error::InvalidInput(
            "bounds and start must have equal nonzero length".into(),
        ));
    }
    if lb
        .iter()
        .zip(ub)
        .any(|(l, u)| !(l < u && l.is_finite() && u.is_finite()))
    {
        return Err(Error::InvalidInput(
            "each lower bound must be below its finite upper bound".into(),
        ));
    }
    let mut pb = Problem { f, lb, ub, evals: 0 };
    let mut z: Vec<f64> = x0
        .iter()
        .zip(lb.iter().zip(ub))
        .map(|(x, (l, u))| ((x - l) / (u - l)).clamp(0.0, 1.0))
        .collect();
    let mut r = pb.eval(&z)?;
    let mut cost = r.norm_squared();
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut jac = pb.jacobian(&z, &r, opts.diff_step)?;

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        if cost <= 1e-30 {
            termination = Termination::ZeroResidual;
            break;
        }
        let g = jac.transpose() * &r;
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((z[i] <= 0.0 && g[i] > 0.0) || (z[i] >= 1.0 && g[i] < 0.0)))
            .collect();
        let pg = free.iter().fold(0.0f64, |m, &i| m.max(g[i].abs()));
        if pg <= opts.gtol * cost.max(1e-300).sqrt().max(1.0) {
            termination = Termination::GradientConverged;
            break;
        }
        let jf = jac.select_columns(&free);
        let a = jf.transpose() * &jf;
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let diag: Vec<f64> = (0..free.len()).map(|k| a[(k, k)].max(1e-12)).collect();
        if lambda < 0.0 {
            lambda = 1e-3 * diag.iter().cloned().fold(0.0, f64::max);
        }

        loop {
            let mut al = a.clone();
            for k in 0..free.len() {
                al[(k, k)] += lambda * diag[k];
            }
            let Some(pf) = al.cholesky().map(|c| c.solve(&(-&gf))) else {
                lambda *= nu;
                nu *= 2.0;
                continue;
            };
            let mut z_new = z.clone();
            for (k, &i) in free.iter().enumerate() {
                z_new[i] = (z[i] + pf[k]).clamp(0.0, 1.0);
            }
            let step = DVector::from_iterator(n, (0..n).map(|i| z_new[i] - z[i]));
            let step_norm = step.norm();
            let z_norm = DVector::from_column_slice(&z).norm();
            if step_norm <= opts.xtol * (opts.xtol + z_norm) {
                termination = Termination::StepConverged;
                break 'outer;
            }
            let js = &jac * &step;
            // predicted decrease of the squared norm for the projected step
            let predicted = -(2.0 * g.dot(&step) + js.norm_squared());
            let r_new = match pb.eval(&z_new) {
                Ok(v) => v,
                Err(Error::Integration { .. }) | Err(Error::Numerical(_)) => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e20 {
                        break 'outer;
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let cost_new = r_new.norm_squared();
            let actual = cost - cost_new;
            let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
            if rho > 0.0 && actual > 0.0 {
                z = z_new;
                r = r_new;
                let small = actual <= opts.ftol * cost;
                cost = cost_new;
                lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                if small {
                    termination = Termination::CostConverged;
                    break 'outer;
                }
                jac = pb.jacobian(&z, &r, opts.diff_step)?;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                termination = if actual.abs() <= opts.ftol * cost {
                    Termination::CostConverged
                } else {
                    Termination::StepConverged
                };
                break 'outer;
            }
        }
    }

    let x = pb.to_x(&z);
    let at_bound = z.iter().map(|&v| v <= 1e-12 || v >= 1.0 - 1e-12).collect();
    Ok(LsqResult {
        x,
        residual: r.as_slice().to_vec(),
        cost,
        iterations,
        evaluations: pb.evals,
        termination,
        at_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
    }

    #[test]
    fn rosenbrock_unconstrained_minimum() {
        let r = least_squares(
            rosenbrock,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &LsqOptions::default(),
        )
        .unwrap();
        assert!(r.termination.converged());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn active_upper_bound() {
        // minimum at (1, 1) lies outside x0 <= 0.5
        let r = least_squares(
            rosenbrock,
            &[0.0, 0.0],
            &[-2.0, -2.0],
            &[0.5, 2.0],
            &LsqOptions::default(),
        )
        .unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-12);
        assert!((r.x[1] - 0.25).abs() < 1e-6);
        assert_eq!(r.at_bound, vec![true, false]);
    }

    #[test]
    fn linear_fit_with_lower_bound() {
        // y = 2 t - 1, slope bounded to [0, 1.5]
        let t: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let f = |p: &[f64]| -> Result<Vec<f64>> { Ok(t.iter().map(|t| p[0] * t + p[1] - (2.0 * t - 1.0)).collect()) };
        let r = least_squares(f, &[1.0, 0.0], &[0.0, -3.0], &[1.5, 3.0], &LsqOptions::default()).unwrap();
        assert_eq!(r.x[0], 1.5);
        // optimal intercept for fixed slope 1.5 is mean(0.5 t - 1) = -0.75
        assert!((r.x[1] + 0.75).abs() < 1e-8);
    }

    #[test]
    fn exact_fit_reaches_zero() {
        let f = |p: &[f64]| -> Result<Vec<f64>> { Ok(vec![p[0] - 3.0, 2.0 * (p[1] + 1.0), p[0] * p[1] + 3.0]) };
        let r = least_squares(f, &[0.0, 0.0], &[-10.0, -10.0], &[10.0, 10.0], &LsqOptions::default()).unwrap();
        assert!(r.cost < 1e-16);
        assert!(r.termination.converged());
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(least_squares(
            rosenbrock,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[0.0, 1.0],
            &LsqOptions::default()
        )
        .is_err());
    }
}
