//! Dormand-Prince 5(4) integrator with step-size control, dense output and
//! breakpoints.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 200_000,
            h_max: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` and returns the solution at each time in
/// `outputs` (ascending, `>= t0`), interpolated with the 5th-order dense output.
///
/// Steps never cross an entry of `breakpoints`; put kinks of the forcing there.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    breakpoints: &[f64],
    tol: &Tolerances,
) -> Result<(Vec<[f64; N]>, Stats)>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut stats = Stats::default();
    let mut out = Vec::with_capacity(outputs.len());
    if outputs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("output times must be ascending".into()));
    }
    let Some(&t_end) = outputs.last() else {
        return Ok((out, stats));
    };
    if outputs[0] < t0 {
        return Err(Error::InvalidInput("output times must not precede t0".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            t: t0,
            reason: "non-finite initial state".into(),
        });
    }

    let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t0 && b < t_end).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut next_stop = 0;

    let mut oi = 0;
    while oi < outputs.len() && outputs[oi] <= t0 {
        out.push(y0);
        oi += 1;
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, tol, &mut stats).min(tol.h_max);
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let uround = f64::EPSILON;

    while oi < outputs.len() {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("more than {} steps", tol.max_steps),
            });
        }
        let stop = stops[next_stop];
        let mut landing = false;
        if t + h >= stop || (stop - t - h) < 1e-12 * stop.abs().max(1.0) {
            h = stop - t;
            landing = true;
        }
        if h.abs() <= 10.0 * uround * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: "step size underflow".into(),
            });
        }

        let mut tmp = [0.0; N];
        for i in 0..N {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + C2 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + C3 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + C4 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + C5 * h, &tmp);
        for i in 0..N {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if landing { stop } else { t + h };
        let k6 = f(t_new, &tmp);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let k7 = f(t_new, &y_new);
        stats.evaluations += 6;

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sk).powi(2);
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }
        let err = (err / N as f64).sqrt();
        if !finite || !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            reject = true;
            continue;
        }

        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let fac = (fac11 / facold.powf(0.04) / 0.9).clamp(1.0 / 10.0, 1.0 / 0.2);
        let mut h_next = (h / fac).min(tol.h_max);

        if err <= 1.0 {
            facold = err.max(1e-4);
            stats.accepted += 1;

            let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
            let cont3: [f64; N] = std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]);
            let cont4: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            while oi < outputs.len() && outputs[oi] <= t_new {
                let s = (outputs[oi] - t) / h;
                let s1 = 1.0 - s;
                out.push(std::array::from_fn(|i| {
                    y[i] + (ydiff[i] + (bspl[i] + (cont3[i] + cont4[i] * s1) * s) * s1) * s
                }));
                oi += 1;
            }
            if landing {
                // exact endpoint values at stops
                if let Some(last) = out.last_mut() {
                    if oi > 0 && outputs[oi - 1] == t_new {
                        *last = y_new;
                    }
                }
                next_stop = (next_stop + 1).min(stops.len() - 1);
            }

            y = y_new;
            t = t_new;
            k1 = if landing {
                stats.evaluations += 1;
                f(t, &y)
            } else {
                k7
            };
            if reject {
                h_next = h_next.min(h);
            }
            reject = false;
        } else {
            h_next = h / (fac11 / 0.9).min(1.0 / 0.2);
            stats.rejected += 1;
            reject = true;
        }
        h = h_next;
    }
    Ok((out, stats))
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    tol: &Tolerances,
    stats: &mut Stats,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = tol.atol + tol.rtol * y[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + h * f0[i]);
    let f1 = f(t + h, &y1);
    stats.evaluations += 1;
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = tol.atol + tol.rtol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    h = (100.0 * h).min(h1);
    h
}

/// Fixed-step classical Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let y2: [f64; N] = std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]);
    let k2 = f(t + 0.5 * h, &y2);
    let y3: [f64; N] = std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]);
    let k3 = f(t + 0.5 * h, &y3);
    let y4: [f64; N] = std::array::from_fn(|i| y[i] + h * k3[i]);
    let k4 = f(t + h, &y4);
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let (ys, _) = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], &ts, &[], &Tolerances::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let ts: Vec<f64> = (0..=37).map(|i| i as f64 * 0.17).collect();
        let (ys, stats) = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            &ts,
            &[],
            &Tolerances::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.sin()).abs() < 1e-7, "t={t}");
        }
        assert!(stats.accepted < 400);
    }

    #[test]
    fn breakpoints_handle_kinked_forcing() {
        let f = |t: f64, _: &[f64; 1]| [(t - 0.5).max(0.0)];
        let (ys, _) = integrate(f, 0.0, [0.0], &[1.0], &[0.5], &Tolerances::default()).unwrap();
        assert!((ys[0][0] - 0.125).abs() < 1e-14);
    }

    #[test]
    fn output_at_start_is_initial_state() {
        let (ys, _) = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [2.0],
            &[0.0, 0.0, 1.0],
            &[],
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(ys[0][0], 2.0);
        assert_eq!(ys[1][0], 2.0);
        assert!((ys[2][0] - 2.0 * 1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn blowup_reports_failure() {
        let r = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            &[2.0],
            &[],
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::Integration { .. })));
    }

    #[test]
    fn rk4_fourth_order() {
        let mut f = |_: f64, y: &[f64; 1]| [-y[0]];
        let mut y = [1.0];
        for i in 0..10 {
            y = rk4_step(&mut f, i as f64 * 0.1, &y, 0.1);
        }
        assert!((y[0] - (-1f64).exp()).abs() < 1e-6);
    }
}
