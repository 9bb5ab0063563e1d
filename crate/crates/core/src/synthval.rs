//! Synthetic-data validation: simulate perturbation experiments with known
//! impedance, add measurement noise, identify, and summarize the errors.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::dynamics::{feedback_torques, FeedForward, ImpedanceParams, Trajectory};
use crate::error::{Error, Result};
use crate::ident::{identify, IdentOptions, IdentProblem};
use crate::model::{
    bias_forces, external_genforce, inverse_dynamics_at, joint_angles, joint_rates, mass_matrix, torques_to_genforce,
    BodyModel, ExternalForce, GenCoord, GenForce, State,
};
use crate::ode::{self, Tolerances};
use crate::signal::{stats, LinearInterp, UniformSpline};

/// Template shipped with the crate: feed-forward forces of the analytic
/// swing targets for [`BodyModel::reference_adult`], sampled at 1 kHz.
pub const BUILTIN_TEMPLATE: &str = include_str!("../data/swing_template.csv");

/// Smooth swing targets relative to toe-off (`t = 0`), returning position,
/// rate and acceleration of each coordinate.
pub fn target_swing(t: f64) -> (GenCoord, GenCoord, GenCoord) {
    let w = PI / 0.6;
    let th = (
        -0.125 + 0.275 * (w * t).cos(),
        -0.275 * w * (w * t).sin(),
        -0.275 * w * w * (w * t).cos(),
    );
    let s = (t - 0.18) / 0.2;
    let e = (-s * s).exp();
    let kappa = (0.05 + e, -2.0 * s / 0.2 * e, (4.0 * s * s - 2.0) / 0.04 * e);
    let s = t / 0.12;
    let e = (-s * s).exp();
    let delta = (
        0.05 - 0.3 * e,
        0.6 * s / 0.12 * e,
        -0.3 * (4.0 * s * s - 2.0) / 0.0144 * e,
    );
    let wc = 2.0 * PI / 1.67;
    let cart = (
        0.015 * (wc * t).sin(),
        0.015 * wc * (wc * t).cos(),
        -0.015 * wc * wc * (wc * t).sin(),
    );
    let sh = (th.0 + kappa.0, th.1 + kappa.1, th.2 + kappa.2);
    let ft = (sh.0 - delta.0, sh.1 - delta.1, sh.2 - delta.2);
    (
        GenCoord::new(cart.0, th.0, sh.0, ft.0),
        GenCoord::new(cart.1, th.1, sh.1, ft.1),
        GenCoord::new(cart.2, th.2, sh.2, ft.2),
    )
}

/// Exact inverse dynamics of [`target_swing`] on a uniform grid.
pub fn template_from_targets(model: &BodyModel, t0: f64, dt: f64, n: usize) -> FeedForward {
    let u = (0..n)
        .map(|i| {
            let (q, qd, qdd) = target_swing(t0 + dt * i as f64);
            let state = State { q, qdot: qd };
            GenForce::from_vector(&inverse_dynamics_at(model, &state, &qdd.to_vector()))
        })
        .collect();
    FeedForward { t0, dt, u }
}

pub fn parse_template(text: &str, origin: &str) -> Result<FeedForward> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut t = Vec::new();
    let mut u = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: origin.into(),
            line,
            message: e.to_string(),
        })?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: origin.into(),
                line,
                message: e.to_string(),
            })?;
        if v.len() != 5 {
            return Err(Error::Parse {
                path: origin.into(),
                line,
                message: format!("expected 5 columns, found {}", v.len()),
            });
        }
        t.push(v[0]);
        u.push(GenForce {
            pelvis: v[1],
            thigh: v[2],
            shank: v[3],
            foot: v[4],
        });
    }
    if t.len() < 4 {
        return Err(Error::Parse {
            path: origin.into(),
            line: t.len() + 1,
            message: "template needs at least 4 rows".into(),
        });
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if let Some(i) = t.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Parse {
            path: origin.into(),
            line: i + 3,
            message: "template time column is not uniformly spaced".into(),
        });
    }
    Ok(FeedForward { t0: t[0], dt, u })
}

pub fn write_template(ff: &FeedForward, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# time [s], generalized forces [N, N*m, N*m, N*m]")?;
    writeln!(w, "t,u_pelvis,u_thigh,u_shank,u_foot")?;
    for (i, u) in ff.u.iter().enumerate() {
        let t = ff.t0 + ff.dt * i as f64;
        writeln!(w, "{t},{},{},{},{}", u.pelvis, u.thigh, u.shank, u.foot)?;
    }
    Ok(())
}

/// Reference swing, perturbation and sampling of a synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Feed-forward forces driving the reference swing.
    pub template: FeedForward,
    /// State at `t_start`.
    pub initial: State,
    pub t_start: f64,
    pub dt: f64,
    pub samples: usize,
    /// Pelvis angle `amp * sin(2π t / period + phase)`.
    pub pelvis_amplitude: f64,
    pub pelvis_period: f64,
    pub pelvis_phase: f64,
    /// Device force during unperturbed walking (N).
    pub force_fx_mean: f64,
    pub force_fx_amplitude: f64,
    pub force_fy_amplitude: f64,
    pub onset: f64,
    pub pulse_amplitude: f64,
    pub pulse_width: f64,
}

impl Scenario {
    /// Built-in scenario: 128 Hz samples from 19 samples before toe-off to
    /// 0.75 s after, 40 N forward pulse of 100 ms at 175 ms.
    pub fn builtin() -> Result<Self> {
        Ok(Self::with_template(parse_template(
            BUILTIN_TEMPLATE,
            "builtin template",
        )?))
    }

    /// Scenario whose template is recomputed for `model` from the analytic targets.
    pub fn analytic(model: &BodyModel) -> Self {
        let base = Self::with_template(FeedForward {
            t0: 0.0,
            dt: 1.0,
            u: Vec::new(),
        });
        let t0 = base.t_start - 0.002;
        let n = ((base.t_end() + 0.002 - t0) * 1000.0).round() as usize + 1;
        Self {
            template: template_from_targets(model, t0, 0.001, n),
            ..base
        }
    }

    fn with_template(template: FeedForward) -> Self {
        let t_start = -19.0 / 128.0;
        let (q, qdot, _) = target_swing(t_start);
        Self {
            template,
            initial: State { q, qdot },
            t_start,
            dt: 1.0 / 128.0,
            samples: 116,
            pelvis_amplitude: 0.05,
            pelvis_period: 1.67,
            pelvis_phase: 0.3,
            force_fx_mean: 0.5,
            force_fx_amplitude: 2.5,
            force_fy_amplitude: 1.0,
            onset: 0.175,
            pulse_amplitude: 40.0,
            pulse_width: 0.100,
        }
    }

    /// Reads `scenario.*` keys over the built-in defaults. `scenario.template`
    /// is `"builtin"`, `"analytic"` or a CSV path relative to the config file.
    pub fn from_config(cfg: &Config, model: &BodyModel) -> Result<Self> {
        let mut s = match cfg.str("scenario.template")? {
            None | Some("builtin") => Self::builtin()?,
            Some("analytic") => Self::analytic(model),
            Some(_) => {
                let path = cfg.path("scenario.template")?.expect("key present");
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Self::with_template(parse_template(&text, &path.display().to_string())?)
            }
        };
        s.onset = cfg.f64_or("scenario.onset", s.onset)?;
        s.pulse_amplitude = cfg.f64_or("scenario.pulse_amplitude", s.pulse_amplitude)?;
        s.pulse_width = cfg.f64_or("scenario.pulse_width", s.pulse_width)?;
        s.force_fx_mean = cfg.f64_or("scenario.force_fx_mean", s.force_fx_mean)?;
        s.force_fx_amplitude = cfg.f64_or("scenario.force_fx_amplitude", s.force_fx_amplitude)?;
        s.force_fy_amplitude = cfg.f64_or("scenario.force_fy_amplitude", s.force_fy_amplitude)?;
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (
            self.onset - crate::ident::WINDOW_BEFORE,
            self.onset + crate::ident::WINDOW_AFTER,
        );
        if !(a >= self.t_start && b <= self.t_end()) {
            return Err(Error::InvalidInput(format!(
                "onset {} s puts the analysis window outside [{}, {}] s",
                self.onset,
                self.t_start,
                self.t_end()
            )));
        }
        if !(self.pulse_width > 0.0) || !self.pulse_amplitude.is_finite() {
            return Err(Error::InvalidInput(
                "pulse needs a positive width and finite amplitude".into(),
            ));
        }
        let tt_end = self.template.t0 + self.template.dt * (self.template.u.len().max(1) - 1) as f64;
        if self.template.t0 > self.t_start + 1e-9 || tt_end < self.t_end() - 1e-9 {
            return Err(Error::InvalidInput(
                "template does not cover the scenario time span".into(),
            ));
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.dt * (self.samples - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + self.dt * i as f64
    }

    pub fn pelvis_angle(&self, t: f64) -> f64 {
        self.pelvis_amplitude * (2.0 * PI * t / self.pelvis_period + self.pelvis_phase).sin()
    }

    /// Unperturbed device force at `t`.
    pub fn unperturbed_force(&self, t: f64) -> ExternalForce {
        ExternalForce::new(
            self.force_fx_mean + self.force_fx_amplitude * (2.0 * PI * t / 0.6 + 0.4).sin(),
            self.force_fy_amplitude * (2.0 * PI * t / 0.9).cos(),
        )
    }

    /// Pulse amplitude at grid sample `i`; samples in `[onset, onset + width)` carry the pulse.
    pub fn pulse_sample(&self, i: usize) -> f64 {
        let t = self.time(i);
        let eps = 1e-9;
        if t >= self.onset - eps && t < self.onset + self.pulse_width - eps {
            self.pulse_amplitude
        } else {
            0.0
        }
    }
}

/// Reference and perturbed swings of one synthetic experiment, before noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSwings {
    pub unperturbed: Trajectory,
    pub perturbed: Trajectory,
}

/// Simulates the reference swing and the perturbed swing with impedance
/// `params` together, so the perturbed feedback tracks the exact reference.
pub fn simulate_swings(model: &BodyModel, params: &ImpedanceParams, sc: &Scenario) -> Result<SyntheticSwings> {
    sc.validate()?;
    let n = sc.samples;
    let fu: Vec<ExternalForce> = (0..n).map(|i| sc.unperturbed_force(sc.time(i))).collect();
    let fp: Vec<ExternalForce> = fu
        .iter()
        .enumerate()
        .map(|(i, f)| ExternalForce::new(f.fx + sc.pulse_sample(i), f.fy))
        .collect();
    let lin = |v: Vec<f64>| LinearInterp::new(sc.t_start, sc.dt, &v);
    let fux = lin(fu.iter().map(|f| f.fx).collect())?;
    let fuy = lin(fu.iter().map(|f| f.fy).collect())?;
    let fpx = lin(fp.iter().map(|f| f.fx).collect())?;
    let fpy = lin(fp.iter().map(|f| f.fy).collect())?;
    let tpl: Vec<UniformSpline> = (0..4)
        .map(|k| {
            let v: Vec<f64> = sc.template.u.iter().map(|u| u.to_vector()[k]).collect();
            UniformSpline::new(sc.template.t0, sc.template.dt, &v)
        })
        .collect::<Result<_>>()?;

    let accel = |state: &State, u: nalgebra::Vector4<f64>| {
        let m = mass_matrix(model, &state.q);
        let (c, g) = bias_forces(model, state);
        m.cholesky()
            .map(|ch| ch.solve(&(-c + g + u)))
            .unwrap_or_else(|| nalgebra::Vector4::repeat(f64::NAN))
    };
    let rhs = |t: f64, y: &[f64; 16]| -> [f64; 16] {
        let su = State {
            q: GenCoord::new(y[0], y[1], y[2], y[3]),
            qdot: GenCoord::new(y[4], y[5], y[6], y[7]),
        };
        let sp = State {
            q: GenCoord::new(y[8], y[9], y[10], y[11]),
            qdot: GenCoord::new(y[12], y[13], y[14], y[15]),
        };
        let base = nalgebra::Vector4::new(tpl[0].eval(t), tpl[1].eval(t), tpl[2].eval(t), tpl[3].eval(t));
        let pelvis = sc.pelvis_angle(t);
        let tq = feedback_torques(
            params,
            &joint_angles(&sp.q, pelvis),
            &joint_rates(&sp.qdot, 0.0),
            &joint_angles(&su.q, pelvis),
            &joint_rates(&su.qdot, 0.0),
        );
        let uu = base + external_genforce(model, &su.q, &ExternalForce::new(fux.eval(t), fuy.eval(t)));
        let up = base
            + external_genforce(model, &sp.q, &ExternalForce::new(fpx.eval(t), fpy.eval(t)))
            + torques_to_genforce(&tq).to_vector();
        let au = accel(&su, uu);
        let ap = accel(&sp, up);
        let mut d = [0.0; 16];
        d[..4].copy_from_slice(&y[4..8]);
        d[4..8].copy_from_slice(au.as_slice());
        d[8..12].copy_from_slice(&y[12..16]);
        d[12..16].copy_from_slice(ap.as_slice());
        d
    };
    let s0 = sc.initial;
    let mut y0 = [0.0; 16];
    for (k, v) in s0.q.as_array().iter().chain(s0.qdot.as_array().iter()).enumerate() {
        y0[k] = *v;
        y0[k + 8] = *v;
    }
    let times: Vec<f64> = (0..n).map(|i| sc.time(i)).collect();
    let tol = Tolerances {
        rtol: 1e-11,
        atol: 1e-13,
        ..Tolerances::default()
    };
    let (ys, _) = ode::integrate(rhs, sc.t_start, y0, &times, &times, &tol)?;
    let pelvis: Vec<f64> = times.iter().map(|&t| sc.pelvis_angle(t)).collect();
    let q_at = |off: usize| -> Vec<GenCoord> {
        ys.iter()
            .map(|y| GenCoord::new(y[off], y[off + 1], y[off + 2], y[off + 3]))
            .collect()
    };
    Ok(SyntheticSwings {
        unperturbed: Trajectory::new(sc.t_start, sc.dt, q_at(0), pelvis.clone(), fu)?,
        perturbed: Trajectory::new(sc.t_start, sc.dt, q_at(8), pelvis, fp)?,
    })
}

/// Adds independent uniform noise of the given peak-to-peak range to every
/// coordinate sample (rad for angles, m for the cart).
pub fn add_noise(traj: &Trajectory, peak_to_peak: f64, rng: &mut impl Rng) -> Trajectory {
    if peak_to_peak == 0.0 {
        return traj.clone();
    }
    let h = 0.5 * peak_to_peak;
    let q = traj
        .q
        .iter()
        .map(|q| {
            let mut n = || rng.random_range(-h..=h);
            GenCoord::new(q.pelvis + n(), q.thigh + n(), q.shank + n(), q.foot + n())
        })
        .collect();
    Trajectory { q, ..traj.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub peak_to_peak: f64,
}

/// Generates a noisy synthetic identification problem with known impedance.
pub fn generate_synthetic(
    model: &BodyModel,
    params: &ImpedanceParams,
    scenario: &Scenario,
    noise: NoiseConfig,
    seed: u64,
    opts: &IdentOptions,
) -> Result<IdentProblem> {
    if !(noise.peak_to_peak >= 0.0 && noise.peak_to_peak.is_finite()) {
        return Err(Error::InvalidInput("noise level must be finite and >= 0".into()));
    }
    let swings = simulate_swings(model, params, scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unperturbed = add_noise(&swings.unperturbed, noise.peak_to_peak, &mut rng);
    let perturbed = add_noise(&swings.perturbed, noise.peak_to_peak, &mut rng);
    IdentProblem::new(*model, unperturbed, perturbed, scenario.onset, opts.inverse)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub stiffness_levels: Vec<f64>,
    pub damping_levels: Vec<f64>,
    pub noise: NoiseConfig,
    pub seed: u64,
    /// Full factorial instead of the diagonal subset.
    pub full: bool,
    pub scenario: Scenario,
    pub ident: IdentOptions,
}

impl ValidationConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            stiffness_levels: vec![0.0, 75.0, 150.0],
            damping_levels: vec![0.0, 2.0, 4.0],
            noise: NoiseConfig { peak_to_peak: 0.0 },
            seed: 0,
            full: false,
            scenario,
            ident: IdentOptions::default(),
        }
    }

    /// Reads `validation.*` keys; the scenario comes from `scenario.*`.
    pub fn from_config(cfg: &Config, model: &BodyModel) -> Result<Self> {
        let mut v = Self::new(Scenario::from_config(cfg, model)?);
        if let Some(k) = cfg.f64_list("validation.stiffness_levels")? {
            v.stiffness_levels = k;
        }
        if let Some(d) = cfg.f64_list("validation.damping_levels")? {
            v.damping_levels = d;
        }
        v.noise.peak_to_peak = cfg.f64_or("validation.noise_peak_to_peak", 0.0)?;
        v.seed = cfg.u64_or("validation.seed", 0)?;
        v.full = cfg.bool_or("validation.full", false)?;
        v.ident = IdentOptions::from_config(cfg)?;
        v.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise.peak_to_peak >= 0.0 && self.noise.peak_to_peak.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise peak-to-peak must be >= 0, got {}",
                self.noise.peak_to_peak
            )));
        }
        if self.stiffness_levels.len() != self.damping_levels.len() && !self.full {
            return Err(Error::InvalidInput(
                "the diagonal grid pairs stiffness and damping levels; give equally many".into(),
            ));
        }
        let ub = ImpedanceParams::upper_bounds();
        let ok = |l: &[f64], u: f64| !l.is_empty() && l.iter().all(|v| (0.0..=u).contains(v));
        if !ok(&self.stiffness_levels, ub[0]) || !ok(&self.damping_levels, ub[3]) {
            return Err(Error::InvalidInput(
                "grid levels must lie within the parameter bounds".into(),
            ));
        }
        if self.ident.n_restarts == 0 {
            return Err(Error::InvalidInput("need at least one restart".into()));
        }
        Ok(())
    }

    pub fn combinations(&self) -> usize {
        let nk = self.stiffness_levels.len().pow(3);
        if self.full {
            nk * self.damping_levels.len().pow(3)
        } else {
            nk
        }
    }

    /// True parameters of combination `index`. Hip varies slowest. In the
    /// diagonal subset each joint's damping level index equals its stiffness
    /// level index.
    pub fn combination(&self, index: usize) -> ImpedanceParams {
        let nk = self.stiffness_levels.len();
        let nd = self.damping_levels.len();
        let digits = |mut v: usize, base: usize| {
            let mut d = [0; 3];
            for j in (0..3).rev() {
                d[j] = v % base;
                v /= base;
            }
            d
        };
        let (ki, di) = if self.full {
            (digits(index / nd.pow(3), nk), digits(index % nd.pow(3), nd))
        } else {
            let k = digits(index, nk);
            (k, k)
        };
        ImpedanceParams::new(ki.map(|i| self.stiffness_levels[i]), di.map(|i| self.damping_levels[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComboResult {
    pub index: usize,
    pub truth: ImpedanceParams,
    pub estimate: Option<ImpedanceParams>,
    pub vaf: [f64; 3],
    pub converged: bool,
    pub failure: Option<String>,
}

impl ComboResult {
    pub fn errors(&self) -> Option<[f64; 6]> {
        let e = self.estimate?.to_array();
        let t = self.truth.to_array();
        Some(std::array::from_fn(|i| e[i] - t[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub min: [f64; 6],
    pub max: [f64; 6],
    pub std: [f64; 6],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ComboResult>,
    pub stats: ErrorStats,
    pub failures: usize,
}

/// Seed of the noise draws for combination `index`.
pub fn noise_seed(master: u64, index: usize) -> u64 {
    master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn run_combination(model: &BodyModel, cfg: &ValidationConfig, index: usize) -> ComboResult {
    let truth = cfg.combination(index);
    let mut ident = cfg.ident;
    ident.seed = cfg.seed.wrapping_add(index as u64);
    let outcome = generate_synthetic(
        model,
        &truth,
        &cfg.scenario,
        cfg.noise,
        noise_seed(cfg.seed, index),
        &ident,
    )
    .and_then(|p| identify(&p, &ident));
    match outcome {
        Ok(r) => ComboResult {
            index,
            truth,
            estimate: Some(r.params),
            vaf: r.vaf,
            converged: true,
            failure: None,
        },
        Err(e) => ComboResult {
            index,
            truth,
            estimate: None,
            vaf: [f64::NAN; 3],
            converged: false,
            failure: Some(e.to_string()),
        },
    }
}

pub fn run_validation(model: &BodyModel, cfg: &ValidationConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let rows: Vec<ComboResult> = (0..cfg.combinations())
        .into_par_iter()
        .map(|i| run_combination(model, cfg, i))
        .collect();
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<ComboResult>) -> ValidationReport {
    let errs: Vec<[f64; 6]> = rows.iter().filter_map(|r| r.errors()).collect();
    let mut st = ErrorStats {
        min: [f64::NAN; 6],
        max: [f64::NAN; 6],
        std: [f64::NAN; 6],
        count: errs.len(),
    };
    if !errs.is_empty() {
        for p in 0..6 {
            let col: Vec<f64> = errs.iter().map(|e| e[p]).collect();
            let (lo, hi) = stats::min_max(&col);
            st.min[p] = lo;
            st.max[p] = hi;
            st.std[p] = if col.len() > 1 { stats::std(&col) } else { 0.0 };
        }
    }
    let failures = rows.iter().filter(|r| !r.converged).count();
    ValidationReport {
        rows,
        stats: st,
        failures,
    }
}

impl ValidationReport {
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        let names = ImpedanceParams::NAMES;
        let mut head = vec!["combination".to_string()];
        head.extend(names.iter().map(|n| format!("{n}_true")));
        head.extend(names.iter().map(|n| format!("{n}_est")));
        head.extend(names.iter().map(|n| format!("{n}_err")));
        head.extend(["vaf_hip_pct", "vaf_knee_pct", "vaf_ankle_pct", "converged"].map(String::from));
        writeln!(w, "# stiffness N*m/rad, damping N*m*s/rad, VAF %")?;
        writeln!(w, "{}", head.join(","))?;
        for r in &self.rows {
            let mut f: Vec<String> = vec![r.index.to_string()];
            f.extend(r.truth.to_array().iter().map(|v| v.to_string()));
            match (r.estimate, r.errors()) {
                (Some(e), Some(err)) => {
                    f.extend(e.to_array().iter().map(|v| v.to_string()));
                    f.extend(err.iter().map(|v| v.to_string()));
                }
                _ => f.extend(std::iter::repeat_n("NaN".to_string(), 12)),
            }
            f.extend(r.vaf.iter().map(|v| v.to_string()));
            f.push(u8::from(r.converged).to_string());
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }

    /// Min, max and standard deviation of the estimation errors, one row per statistic.
    pub fn write_summary(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "# estimation errors over {} identified combinations, {} failed",
            self.stats.count, self.failures
        )?;
        writeln!(w, "statistic,{}", ImpedanceParams::NAMES.join(","))?;
        for (name, v) in [
            ("min_error", self.stats.min),
            ("max_error", self.stats.max),
            ("std_error", self.stats.std),
        ] {
            let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &t in &[-0.1, 0.0, 0.13, 0.4, 0.7] {
            let (_, qd, qdd) = target_swing(t);
            let (qp, qdp, _) = target_swing(t + h);
            let (qm, qdm, _) = target_swing(t - h);
            for k in 0..4 {
                let fd1 = (qp.as_array()[k] - qm.as_array()[k]) / (2.0 * h);
                let fd2 = (qdp.as_array()[k] - qdm.as_array()[k]) / (2.0 * h);
                assert!((fd1 - qd.as_array()[k]).abs() < 1e-7);
                assert!((fd2 - qdd.as_array()[k]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn diagonal_and_full_grids() {
        let mut cfg = ValidationConfig::new(Scenario::builtin().unwrap());
        assert_eq!(cfg.combinations(), 27);
        let p = cfg.combination(5); // digits 0,1,2
        assert_eq!(p.k, [0.0, 75.0, 150.0]);
        assert_eq!(p.d, [0.0, 2.0, 4.0]);
        cfg.full = true;
        assert_eq!(cfg.combinations(), 729);
        let p = cfg.combination(728);
        assert_eq!(p.k, [150.0; 3]);
        assert_eq!(p.d, [4.0; 3]);
        let p = cfg.combination(27 * 13 + 1);
        assert_eq!(p.k, [75.0; 3]);
        assert_eq!(p.d, [0.0, 0.0, 2.0]);
        let all: std::collections::BTreeSet<String> = (0..729).map(|i| format!("{:?}", cfg.combination(i))).collect();
        assert_eq!(all.len(), 729);
    }

    #[test]
    fn negative_noise_rejected() {
        let mut cfg = ValidationConfig::new(Scenario::builtin().unwrap());
        cfg.noise.peak_to_peak = -0.01;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn template_round_trips_through_text() {
        let m = BodyModel::reference_adult();
        let ff = template_from_targets(&m, -0.1, 0.001, 50);
        let mut buf = Vec::new();
        write_template(&ff, &mut buf).unwrap();
        let back = parse_template(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back.u, ff.u);
        assert!((back.dt - 0.001).abs() < 1e-15);
    }

    #[test]
    fn builtin_template_matches_analytic_targets() {
        let sc = Scenario::builtin().unwrap();
        let fresh = Scenario::analytic(&BodyModel::reference_adult());
        assert_eq!(sc.template.u.len(), fresh.template.u.len());
        for (a, b) in sc.template.u.iter().zip(&fresh.template.u) {
            assert!((a.to_vector() - b.to_vector()).abs().max() < 1e-9);
        }
    }
}
