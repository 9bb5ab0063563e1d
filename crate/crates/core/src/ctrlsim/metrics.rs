use crate::error::{Error, Result};
use crate::signal::stats::mean;
use crate::signal::welch::{frf_welch, Frf, WelchConfig};

/// Bins averaged for the reference gain of the loop FRF.
pub const LOW_FREQUENCY_BINS: (usize, usize) = (2, 10);

/// Band around the steady state the final 20% must stay inside.
const SETTLE_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub steady_state: f64,
    /// 10% to 90% of the steady state (s).
    pub rise_time: f64,
    /// Peak above the steady state, percent of the steady state.
    pub overshoot: f64,
    pub peak: f64,
}

/// Metrics of a step response sampled at `dt`, starting at the step.
pub fn step_metrics(y: &[f64], dt: f64) -> Result<StepMetrics> {
    if y.len() < 10 || !(dt > 0.0) {
        return Err(Error::InvalidInput("step response needs at least 10 samples".into()));
    }
    let tail = &y[y.len() - y.len() / 5..];
    let ss = mean(tail);
    if !ss.is_finite() || ss.abs() < f64::EPSILON {
        return Err(Error::NotSettled("steady state is zero".into()));
    }
    let worst = tail.iter().map(|v| (v - ss).abs()).fold(0.0, f64::max);
    if worst > SETTLE_BAND * ss.abs() {
        return Err(Error::NotSettled(format!(
            "final 20% deviates {:.3}% from the steady state {ss:.4}",
            100.0 * worst / ss.abs()
        )));
    }
    let crossing = |level: f64| -> Option<f64> {
        let target = level * ss;
        let above = |v: f64| v * ss.signum() >= target * ss.signum();
        let i = y.iter().position(|&v| above(v))?;
        if i == 0 {
            return Some(0.0);
        }
        let (a, b) = (y[i - 1], y[i]);
        Some((i as f64 - 1.0 + (target - a) / (b - a)) * dt)
    };
    let (t10, t90) = match (crossing(0.1), crossing(0.9)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::NotSettled(
                "response never reaches 90% of its final value".into(),
            ))
        }
    };
    let peak = if ss > 0.0 {
        y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        y.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(StepMetrics {
        steady_state: ss,
        rise_time: t90 - t10,
        overshoot: ((peak - ss) / ss * 100.0).max(0.0),
        peak,
    })
}

#[derive(Debug, Clone)]
pub struct FrfSummary {
    pub frf: Frf,
    pub low_frequency_gain: f64,
    /// −3 dB frequency relative to the low-frequency gain (Hz).
    pub bandwidth: Option<f64>,
}

/// Frequency response from desired to measured force with Hann-windowed
/// Welch averaging.
pub fn loop_frf(desired: &[f64], measured: &[f64], fs: f64, segment: usize, overlap: usize) -> Result<FrfSummary> {
    let frf = frf_welch(desired, measured, &WelchConfig { segment, overlap, fs })?;
    let (lo, hi) = LOW_FREQUENCY_BINS;
    if frf.h.len() <= hi {
        return Err(Error::InvalidInput(format!(
            "segment of {segment} samples is too short"
        )));
    }
    let low_frequency_gain = frf.low_frequency_gain(lo, hi);
    if !(low_frequency_gain > 0.0 && low_frequency_gain.is_finite()) {
        return Err(Error::InvalidInput("input has no power at low frequencies".into()));
    }
    let bandwidth = frf.bandwidth(lo, hi, 0.5 * fs);
    Ok(FrfSummary {
        frf,
        low_frequency_gain,
        bandwidth,
    })
}
