use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::admittance::{Admittance, ControllerParams};
use super::plant::{PlantModel, PlantState};
use super::pva::{pva_limit, PvaLimits, SafetyTrip};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::signal::filter::{Sos, StreamingSos};

/// Desired interaction force profile (N).
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    Step {
        amplitude: f64,
        at: f64,
    },
    /// Uniform white noise through a causal Butterworth low-pass, scaled to
    /// the given peak-to-peak amplitude.
    FilteredNoise {
        peak_to_peak: f64,
        cutoff: f64,
        order: usize,
        seed: u64,
    },
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopScenario {
    pub profile: Profile,
    /// Ignored for `Profile::Samples`.
    pub duration: f64,
    /// Window after the step used for step metrics (s).
    pub step_window: f64,
    pub frf_segment: usize,
    pub frf_overlap: usize,
}

impl LoopScenario {
    pub fn step(amplitude: f64) -> Self {
        Self {
            profile: Profile::Step { amplitude, at: 0.1 },
            duration: 0.4,
            step_window: 0.25,
            frf_segment: 5000,
            frf_overlap: 50,
        }
    }

    pub fn noise(duration: f64, seed: u64) -> Self {
        Self {
            profile: Profile::FilteredNoise {
                peak_to_peak: 60.0,
                cutoff: 60.0,
                order: 4,
                seed,
            },
            duration,
            ..Self::step(0.0)
        }
    }

    /// Keys under `input.*`: `profile` (`step`, `noise` or `zero`),
    /// `duration`, `amplitude`, `step_time`, `step_window`, `peak_to_peak`,
    /// `cutoff`, `order`, `frf_segment`, `frf_overlap`. The noise seed is
    /// `input.seed`, falling back to `seed`.
    pub fn from_config(cfg: &Config, seed: u64) -> Result<Self> {
        let kind = cfg.str("input.profile")?.unwrap_or("step");
        let base = Self::step(40.0);
        let profile = match kind {
            "step" => Profile::Step {
                amplitude: cfg.f64_or("input.amplitude", 40.0)?,
                at: cfg.f64_or("input.step_time", 0.1)?,
            },
            "noise" => Profile::FilteredNoise {
                peak_to_peak: cfg.f64_or("input.peak_to_peak", 60.0)?,
                cutoff: cfg.f64_or("input.cutoff", 60.0)?,
                order: cfg.usize_or("input.order", 4)?,
                seed: cfg.u64_or("input.seed", seed)?,
            },
            "zero" => Profile::Zero,
            other => {
                return Err(Error::Config(format!(
                    "input.profile must be step, noise or zero, found `{other}`"
                )))
            }
        };
        let default_duration = if kind == "noise" { 60.0 } else { base.duration };
        let s = Self {
            profile,
            duration: cfg.f64_or("input.duration", default_duration)?,
            step_window: cfg.f64_or("input.step_window", base.step_window)?,
            frf_segment: cfg.usize_or("input.frf_segment", base.frf_segment)?,
            frf_overlap: cfg.usize_or("input.frf_overlap", base.frf_overlap)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) || !(self.step_window > 0.0) {
            return Err(Error::Config(
                "input.duration and input.step_window must be positive".into(),
            ));
        }
        match &self.profile {
            Profile::Step { amplitude, at } => {
                if !amplitude.is_finite() || !(*at >= 0.0) || at + self.step_window > self.duration + 1e-12 {
                    return Err(Error::Config(
                        "step must be finite and leave a full step window before the end".into(),
                    ));
                }
            }
            Profile::FilteredNoise {
                peak_to_peak,
                cutoff,
                order,
                ..
            } => {
                if !(*peak_to_peak > 0.0 && *cutoff > 0.0) || *order == 0 {
                    return Err(Error::Config(
                        "noise amplitude, cutoff and order must be positive".into(),
                    ));
                }
            }
            Profile::Samples(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("force profile contains non-finite samples".into()));
                }
            }
            Profile::Zero => {}
        }
        Ok(())
    }

    /// Desired force sampled at `fs`.
    pub fn desired_force(&self, fs: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let n = (self.duration * fs).round() as usize;
        Ok(match &self.profile {
            Profile::Zero => vec![0.0; n],
            Profile::Step { amplitude, at } => {
                let k = (at * fs).round() as usize;
                (0..n).map(|i| if i >= k { *amplitude } else { 0.0 }).collect()
            }
            Profile::FilteredNoise {
                peak_to_peak,
                cutoff,
                order,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let white: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = Sos::butter_lowpass(*order, *cutoff, fs)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .filter(&white);
                let (lo, hi) = crate::signal::stats::min_max(&y);
                let mid = 0.5 * (lo + hi);
                y.iter().map(|v| (v - mid) * peak_to_peak / (hi - lo)).collect()
            }
            Profile::Samples(v) => v.clone(),
        })
    }

    /// Sample index of the step and the number of samples in the step window.
    pub fn step_range(&self, fs: f64) -> Option<(usize, usize)> {
        match self.profile {
            Profile::Step { at, .. } => Some(((at * fs).round() as usize, (self.step_window * fs).round() as usize)),
            _ => None,
        }
    }
}

/// Signals logged once per control tick.
#[derive(Debug, Clone, Default)]
pub struct LoopTrace {
    pub dt: f64,
    pub desired: Vec<f64>,
    pub filtered: Vec<f64>,
    pub measured: Vec<f64>,
    pub admittance_out: Vec<f64>,
    pub command: Vec<f64>,
    pub limiter_active: Vec<bool>,
    pub motor_angle: Vec<f64>,
    pub motor_velocity: Vec<f64>,
    pub motor_torque: Vec<f64>,
    pub leg_angle: Vec<f64>,
    pub trip: Option<SafetyTrip>,
}

impl LoopTrace {
    pub fn len(&self) -> usize {
        self.desired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.desired.is_empty()
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "time [s],desired_force [N],filtered_force [N],measured_force [N],admittance_velocity [rad/s],\
             command_velocity [rad/s],limiter_active [-],motor_angle [rad],motor_velocity [rad/s],\
             motor_torque [N*m],leg_angle [rad]"
        )?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                i as f64 * self.dt,
                self.desired[i],
                self.filtered[i],
                self.measured[i],
                self.admittance_out[i],
                self.command[i],
                u8::from(self.limiter_active[i]),
                self.motor_angle[i],
                self.motor_velocity[i],
                self.motor_torque[i],
                self.leg_angle[i],
            )?;
        }
        Ok(())
    }
}

/// Runs the admittance loop against the plant for the desired force samples.
///
/// Each tick measures the rod force, filters the desired force, feeds the
/// torque error to the admittance, limits the resulting velocity and hands it
/// to the drive after the plant's transport delay.
pub fn simulate_loop(
    params: &ControllerParams,
    limits: &PvaLimits,
    plant: &PlantModel,
    desired: &[f64],
) -> Result<LoopTrace> {
    params.validate()?;
    limits.validate()?;
    plant.validate()?;
    if desired.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("desired force contains non-finite samples".into()));
    }
    let dt = params.dt();
    let hf = Sos::butter_lowpass(params.hf_order, params.hf_cutoff, params.sample_rate)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut hf = StreamingSos::new(hf);
    let mut hc = Admittance::new(params);
    let abort = 10.0 * crate::signal::stats::max_abs(desired).max(1.0);
    let mut pending: VecDeque<f64> = std::iter::repeat_n(0.0, plant.delay_ticks).collect();
    let mut state = PlantState::default();
    let mut applied = 0.0;
    let mut last_limited = 0.0;
    let mut tr = LoopTrace {
        dt,
        ..LoopTrace::default()
    };
    for (i, &fd) in desired.iter().enumerate() {
        let t = i as f64 * dt;
        let fm = plant.interaction(&state).0;
        if !fm.is_finite() || fm.abs() > abort {
            return Err(Error::Unstable {
                t,
                force: fm,
                limit: abort,
            });
        }
        let ff = hf.step(fd);
        let tau_in = plant.moment_arm(&state) * (ff - fm);
        let raw = hc.step(tau_in);
        let limited = pva_limit(limits, raw, state.motor, last_limited, dt);
        last_limited = limited;
        pending.push_back(limited);
        let cmd = pending.pop_front().unwrap_or(limited);
        let torque = plant.motor_torque(&state, applied);
        if tr.trip.is_none() {
            tr.trip = limits.check(t, state.motor, state.motor_rate, torque);
        }
        tr.desired.push(fd);
        tr.filtered.push(ff);
        tr.measured.push(fm);
        tr.admittance_out.push(raw);
        tr.command.push(limited);
        tr.limiter_active.push((limited - raw).abs() > 1e-12);
        tr.motor_angle.push(state.motor);
        tr.motor_velocity.push(state.motor_rate);
        tr.motor_torque.push(torque);
        tr.leg_angle.push(state.leg);
        state = plant.advance(&state, cmd, dt);
        applied = cmd;
        if !state.is_finite() {
            return Err(Error::Unstable {
                t,
                force: f64::NAN,
                limit: abort,
            });
        }
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctrlsim::metrics::{loop_frf, step_metrics};
    use crate::model::BodyModel;

    fn defaults() -> (ControllerParams, PvaLimits, PlantModel) {
        (
            ControllerParams::default(),
            PvaLimits::default(),
            PlantModel::from_body(&BodyModel::reference_adult()),
        )
    }

    #[test]
    fn step_response_in_band() {
        let (p, l, pl) = defaults();
        let mut rel = Vec::new();
        for amp in [20.0, 40.0, 60.0] {
            let sc = LoopScenario::step(amp);
            let fd = sc.desired_force(p.sample_rate).unwrap();
            let tr = simulate_loop(&p, &l, &pl, &fd).unwrap();
            let (k, w) = sc.step_range(p.sample_rate).unwrap();
            let m = step_metrics(&tr.measured[k..k + w], tr.dt).unwrap();
            eprintln!("{amp} N: {m:?}");
            rel.push(m.steady_state / amp);
            if amp == 40.0 {
                assert!((0.85..=0.95).contains(&rel[1]));
                assert!((0.005..=0.02).contains(&m.rise_time));
                assert!((10.0..=50.0).contains(&m.overshoot));
            }
        }
        let (lo, hi) = crate::signal::stats::min_max(&rel);
        assert!(hi / lo - 1.0 < 0.05);
    }

    #[test]
    fn nonlinear_linkage_close_to_linear() {
        let (p, l, pl) = defaults();
        let nl = PlantModel {
            nonlinear_linkage: true,
            ..pl
        };
        let sc = LoopScenario::step(40.0);
        let fd = sc.desired_force(p.sample_rate).unwrap();
        let (k, w) = sc.step_range(p.sample_rate).unwrap();
        let a = step_metrics(&simulate_loop(&p, &l, &pl, &fd).unwrap().measured[k..k + w], 1e-3).unwrap();
        let b = step_metrics(&simulate_loop(&p, &l, &nl, &fd).unwrap().measured[k..k + w], 1e-3).unwrap();
        eprintln!("{a:?}\n{b:?}");
        assert!((a.steady_state - b.steady_state).abs() < 0.02 * a.steady_state);
    }

    #[test]
    fn zero_force_stays_transparent() {
        let (p, l, pl) = defaults();
        let tr = simulate_loop(&p, &l, &pl, &vec![0.0; 2000]).unwrap();
        assert!(tr.measured.iter().all(|f| f.abs() < 0.5));
    }

    #[test]
    fn noise_bandwidth() {
        let (p, l, pl) = defaults();
        let sc = LoopScenario::noise(60.0, 7);
        let fd = sc.desired_force(p.sample_rate).unwrap();
        let (lo, hi) = crate::signal::stats::min_max(&fd);
        assert!((hi - lo - 60.0).abs() < 1e-9);
        let tr = simulate_loop(&p, &l, &pl, &fd).unwrap();
        let s = loop_frf(&fd, &tr.measured, p.sample_rate, 5000, 50).unwrap();
        eprintln!(
            "bw {:?} gain {} max {}",
            s.bandwidth,
            s.low_frequency_gain,
            crate::signal::stats::max_abs(&tr.measured)
        );
        assert!(s.bandwidth.unwrap() >= 20.0);
    }

    #[test]
    fn soft_cuff_against_stiff_gain_aborts() {
        let (mut p, l, pl) = defaults();
        p.c = 500.0;
        let sc = LoopScenario::step(40.0);
        let fd = sc.desired_force(p.sample_rate).unwrap();
        assert!(matches!(simulate_loop(&p, &l, &pl, &fd), Err(Error::Unstable { .. })));
    }
}
