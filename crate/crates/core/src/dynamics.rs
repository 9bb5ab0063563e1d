//! Inverse dynamics of recorded kinematics and forward simulation of the
//! unperturbed and perturbed swing under the joint impedance feedback law.

use nalgebra::{Matrix2x4, Vector4};

use crate::error::{Error, Result};
use crate::model::{
    bias_forces, interaction_jacobian, joint_angles, joint_rates, mass_matrix, torques_to_genforce, BodyModel,
    ExternalForce, GenCoord, GenForce, JointAngles, JointTorques, State,
};
use crate::ode::{self, Tolerances};
use crate::signal::{derivatives, DiffScheme, LinearInterp, Sos, UniformSpline};
use crate::table::parse_table;

pub const DEFAULT_SAMPLE_RATE: f64 = 128.0;
pub const K_MAX: f64 = 200.0;
pub const D_MAX: f64 = 10.0;

/// Uniformly sampled experimental (or synthetic) swing data.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub q: Vec<GenCoord>,
    pub pelvis_angle: Vec<f64>,
    pub force: Vec<ExternalForce>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, q: Vec<GenCoord>, pelvis_angle: Vec<f64>, force: Vec<ExternalForce>) -> Result<Self> {
        let tr = Self {
            t0,
            dt,
            q,
            pelvis_angle,
            force,
        };
        tr.validate()?;
        Ok(tr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t0.is_finite()) {
            return Err(Error::InvalidInput("trajectory needs a finite t0 and dt > 0".into()));
        }
        let n = self.q.len();
        if n < 3 {
            return Err(Error::InvalidInput(format!("trajectory has {n} samples, need >= 3")));
        }
        if self.pelvis_angle.len() != n || self.force.len() != n {
            return Err(Error::InvalidInput("trajectory series have different lengths".into()));
        }
        let bad = self.q.iter().position(|q| !q.is_finite()).or_else(|| {
            self.pelvis_angle
                .iter()
                .zip(&self.force)
                .position(|(p, f)| !(p.is_finite() && f.fx.is_finite() && f.fy.is_finite()))
        });
        if let Some(i) = bad {
            return Err(Error::InvalidInput(format!(
                "non-finite trajectory sample at index {i}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn joint_angles(&self) -> Vec<JointAngles> {
        self.q
            .iter()
            .zip(&self.pelvis_angle)
            .map(|(q, p)| joint_angles(q, *p))
            .collect()
    }

    /// Indices of grid points inside `[a, b]` (with a tolerance of 1e-6 samples).
    pub fn window_indices(&self, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
        let eps = 1e-6;
        let lo = ((a - self.t0) / self.dt - eps).ceil().max(0.0) as usize;
        let hi = ((b - self.t0) / self.dt + eps).floor();
        let hi = if hi < 0.0 { 0 } else { (hi as usize).min(self.len() - 1) };
        lo..=hi
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.q.iter().map(|q| q.as_array()[k]).collect()
    }

    /// Copy with each coordinate channel passed through `f`.
    fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let ch: Vec<Vec<f64>> = (0..4).map(|k| f(&self.channel(k))).collect::<Result<_>>()?;
        let q = (0..self.len())
            .map(|i| GenCoord::new(ch[0][i], ch[1][i], ch[2][i], ch[3][i]))
            .collect();
        Ok(Self { q, ..self.clone() })
    }
}

impl Trajectory {
    /// Columnar text with the generalized coordinates, pelvis angle and
    /// interaction force; hip, knee and ankle angles follow for plotting and
    /// are ignored when reading.
    pub fn write(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(
            w,
            "time [s],pelvis_x [m],thigh [rad],shank [rad],foot [rad],pelvis_angle [rad],\
             force_x [N],force_y [N],hip [rad],knee [rad],ankle [rad]"
        )?;
        for (i, j) in self.joint_angles().iter().enumerate() {
            let (q, f) = (self.q[i], self.force[i]);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.time(i),
                q.pelvis,
                q.thigh,
                q.shank,
                q.foot,
                self.pelvis_angle[i],
                f.fx,
                f.fy,
                j.hip,
                j.knee,
                j.ankle
            )?;
        }
        Ok(())
    }
}

pub fn read_trajectory(path: impl AsRef<std::path::Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn parse_trajectory(text: &str, origin: impl AsRef<std::path::Path>) -> Result<Trajectory> {
    let table = parse_table(text, origin)?;
    let (t0, dt) = table.uniform_time(3)?;
    let c: Vec<&[f64]> = [
        "pelvis_x",
        "thigh",
        "shank",
        "foot",
        "pelvis_angle",
        "force_x",
        "force_y",
    ]
    .iter()
    .map(|n| table.column(n))
    .collect::<Result<_>>()?;
    let n = table.len();
    Trajectory::new(
        t0,
        dt,
        (0..n)
            .map(|i| GenCoord::new(c[0][i], c[1][i], c[2][i], c[3][i]))
            .collect(),
        c[4].to_vec(),
        (0..n).map(|i| ExternalForce::new(c[5][i], c[6][i])).collect(),
    )
}

/// Stiffness (N·m/rad) and damping (N·m·s/rad) of hip, knee and ankle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImpedanceParams {
    pub k: [f64; 3],
    pub d: [f64; 3],
}

impl ImpedanceParams {
    pub const NAMES: [&'static str; 6] = ["K_hip", "K_knee", "K_ankle", "D_hip", "D_knee", "D_ankle"];

    pub fn new(k: [f64; 3], d: [f64; 3]) -> Self {
        Self { k, d }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.k[0], self.k[1], self.k[2], self.d[0], self.d[1], self.d[2]]
    }

    pub fn from_array(p: &[f64; 6]) -> Self {
        Self {
            k: [p[0], p[1], p[2]],
            d: [p[3], p[4], p[5]],
        }
    }

    pub fn lower_bounds() -> [f64; 6] {
        [0.0; 6]
    }

    pub fn upper_bounds() -> [f64; 6] {
        [K_MAX, K_MAX, K_MAX, D_MAX, D_MAX, D_MAX]
    }

    pub fn within_bounds(&self) -> bool {
        let ub = Self::upper_bounds();
        self.to_array().iter().zip(ub).all(|(v, u)| (0.0..=u).contains(v))
    }
}

/// Feed-forward generalized forces on the grid of the source trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub t0: f64,
    pub dt: f64,
    pub u: Vec<GenForce>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDynamicsOptions {
    /// Zero-phase Butterworth low-pass applied to coordinates before
    /// differentiation; `None` disables filtering.
    pub cutoff_hz: Option<f64>,
    pub filter_order: usize,
    pub scheme: DiffScheme,
}

impl Default for InverseDynamicsOptions {
    fn default() -> Self {
        Self {
            cutoff_hz: Some(40.0),
            filter_order: 4,
            scheme: DiffScheme::Central4,
        }
    }
}

/// Low-pass filters the coordinate channels of `traj` as done before
/// differentiation. Pelvis angle and forces pass through unchanged.
pub fn smooth_kinematics(traj: &Trajectory, opts: &InverseDynamicsOptions) -> Result<Trajectory> {
    match opts.cutoff_hz {
        None => Ok(traj.clone()),
        Some(fc) => {
            let sos = Sos::butter_lowpass(opts.filter_order, fc, 1.0 / traj.dt)?;
            traj.map_channels(|x| sos.filtfilt(x))
        }
    }
}

/// `u_ff = M(q) qdd + C(q, qd) - G(q)` on the trajectory grid.
pub fn inverse_dynamics(model: &BodyModel, traj: &Trajectory, opts: &InverseDynamicsOptions) -> Result<FeedForward> {
    traj.validate()?;
    if traj.len() < opts.scheme.min_len().max(5) {
        return Err(Error::InvalidInput(format!(
            "inverse dynamics needs at least {} samples",
            opts.scheme.min_len().max(5)
        )));
    }
    let smooth = smooth_kinematics(traj, opts)?;
    let mut d1 = Vec::with_capacity(4);
    let mut d2 = Vec::with_capacity(4);
    for k in 0..4 {
        let (a, b) = derivatives(&smooth.channel(k), traj.dt, opts.scheme)?;
        d1.push(a);
        d2.push(b);
    }
    let u = (0..traj.len())
        .map(|i| {
            let state = State {
                q: smooth.q[i],
                qdot: GenCoord::new(d1[0][i], d1[1][i], d1[2][i], d1[3][i]),
            };
            let qdd = Vector4::new(d2[0][i], d2[1][i], d2[2][i], d2[3][i]);
            let m = mass_matrix(model, &state.q);
            let (c, g) = bias_forces(model, &state);
            GenForce::from_vector(&(m * qdd + c - g))
        })
        .collect();
    Ok(FeedForward {
        t0: traj.t0,
        dt: traj.dt,
        u,
    })
}

/// Impedance feedback `T = -K (θ_m - θ_ref) - D (θ̇_m - θ̇_ref)` per joint.
pub fn feedback_torques(
    params: &ImpedanceParams,
    model_angles: &JointAngles,
    model_rates: &JointAngles,
    ref_angles: &JointAngles,
    ref_rates: &JointAngles,
) -> JointTorques {
    let e = [
        model_angles.hip - ref_angles.hip,
        model_angles.knee - ref_angles.knee,
        model_angles.ankle - ref_angles.ankle,
    ];
    let de = [
        model_rates.hip - ref_rates.hip,
        model_rates.knee - ref_rates.knee,
        model_rates.ankle - ref_rates.ankle,
    ];
    let t: [f64; 3] = std::array::from_fn(|j| -params.k[j] * e[j] - params.d[j] * de[j]);
    JointTorques {
        hip: t[0],
        knee: t[1],
        ankle: t[2],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Unperturbed,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub tol: Tolerances,
}

/// Simulated swing on the reference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub q: Vec<GenCoord>,
    pub qdot: Vec<GenCoord>,
    pub angles: Vec<JointAngles>,
}

struct Coords {
    q: [UniformSpline; 4],
    pelvis: UniformSpline,
    fx: LinearInterp,
    fy: LinearInterp,
}

impl Coords {
    fn new(tr: &Trajectory) -> Result<Self> {
        let sp = |k: usize| UniformSpline::new(tr.t0, tr.dt, &tr.channel(k));
        let fx: Vec<f64> = tr.force.iter().map(|f| f.fx).collect();
        let fy: Vec<f64> = tr.force.iter().map(|f| f.fy).collect();
        Ok(Self {
            q: [sp(0)?, sp(1)?, sp(2)?, sp(3)?],
            pelvis: UniformSpline::new(tr.t0, tr.dt, &tr.pelvis_angle)?,
            fx: LinearInterp::new(tr.t0, tr.dt, &fx)?,
            fy: LinearInterp::new(tr.t0, tr.dt, &fy)?,
        })
    }

    fn state(&self, t: f64) -> State {
        let e: [(f64, f64, f64); 4] = std::array::from_fn(|k| self.q[k].eval_all(t));
        State {
            q: GenCoord::new(e[0].0, e[1].0, e[2].0, e[3].0),
            qdot: GenCoord::new(e[0].1, e[1].1, e[2].1, e[3].1),
        }
    }

    fn thigh(&self, t: f64) -> f64 {
        self.q[1].eval(t)
    }

    fn force(&self, t: f64) -> ExternalForce {
        ExternalForce::new(self.fx.eval(t), self.fy.eval(t))
    }
}

/// Forward simulator for one perturbation experiment; interpolants of the
/// exogenous signals are built once and shared by all simulations.
pub struct Simulator {
    model: BodyModel,
    reference: Coords,
    perturbed: Option<Coords>,
    u_ff: [UniformSpline; 4],
    grid_t0: f64,
    dt: f64,
    grid_len: usize,
    opts: SimOptions,
}

impl Simulator {
    /// `reference` is the unperturbed experimental swing the feedback tracks
    /// and the initial state is taken from; `perturbed` supplies the
    /// perturbed kinematics, pelvis angle and force for the perturbed condition.
    pub fn new(
        model: BodyModel,
        reference: &Trajectory,
        u_ff: &FeedForward,
        perturbed: Option<&Trajectory>,
        opts: SimOptions,
    ) -> Result<Self> {
        reference.validate()?;
        if u_ff.u.len() != reference.len()
            || (u_ff.dt - reference.dt).abs() > 1e-12 * reference.dt
            || (u_ff.t0 - reference.t0).abs() > 1e-9
        {
            return Err(Error::InvalidInput(
                "feed-forward forces must share the reference grid".into(),
            ));
        }
        if let Some(p) = perturbed {
            p.validate()?;
            if p.len() != reference.len() || (p.dt - reference.dt).abs() > 1e-12 * reference.dt {
                return Err(Error::InvalidInput(
                    "perturbed and unperturbed trajectories must share a grid".into(),
                ));
            }
        }
        let uch = |k: usize| {
            let v: Vec<f64> = u_ff.u.iter().map(|u| u.to_vector()[k]).collect();
            UniformSpline::new(u_ff.t0, u_ff.dt, &v)
        };
        Ok(Self {
            model,
            reference: Coords::new(reference)?,
            perturbed: perturbed.map(Coords::new).transpose()?,
            u_ff: [uch(0)?, uch(1)?, uch(2)?, uch(3)?],
            grid_t0: reference.t0,
            dt: reference.dt,
            grid_len: reference.len(),
            opts,
        })
    }

    pub fn model(&self) -> &BodyModel {
        &self.model
    }

    fn grid_time(&self, i: usize) -> f64 {
        self.grid_t0 + self.dt * i as f64
    }

    /// Grid times inside `[a, b]`.
    pub fn window_times(&self, a: f64, b: f64) -> Vec<f64> {
        let eps = 1e-6;
        let lo = ((a - self.grid_t0) / self.dt - eps).ceil().max(0.0) as usize;
        let hi = ((b - self.grid_t0) / self.dt + eps).floor().max(-1.0);
        if hi < 0.0 {
            return Vec::new();
        }
        (lo..=(hi as usize).min(self.grid_len - 1))
            .map(|i| self.grid_time(i))
            .collect()
    }

    /// Simulates `condition` from the reference state at `window.0` and
    /// reports the state on the grid points inside `window`.
    pub fn simulate(&self, params: &ImpedanceParams, condition: Condition, window: (f64, f64)) -> Result<SimTrace> {
        let (a, b) = window;
        let t_last = self.grid_time(self.grid_len - 1);
        if !(a < b && a >= self.grid_t0 - 1e-9 && b <= t_last + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "window [{a}, {b}] outside data support [{}, {t_last}]",
                self.grid_t0
            )));
        }
        let pert = match condition {
            Condition::Unperturbed => None,
            Condition::Perturbed => Some(
                self.perturbed
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("perturbed condition needs perturbed data".into()))?,
            ),
        };
        let times = self.window_times(a, b);
        // a grid point within rounding of `a` counts as the start
        let start = times.first().map_or(a, |&t| t.min(a));
        let s0 = self.reference.state(start);
        let y0 = [
            s0.q.pelvis,
            s0.q.thigh,
            s0.q.shank,
            s0.q.foot,
            s0.qdot.pelvis,
            s0.qdot.thigh,
            s0.qdot.shank,
            s0.qdot.foot,
        ];
        let model = &self.model;
        let reference = &self.reference;
        let u_ff = &self.u_ff;
        let rhs = |t: f64, y: &[f64; 8]| -> [f64; 8] {
            let state = State {
                q: GenCoord::new(y[0], y[1], y[2], y[3]),
                qdot: GenCoord::new(y[4], y[5], y[6], y[7]),
            };
            let rs = reference.state(t);
            let (pu, pud, _) = reference.pelvis.eval_all(t);
            let (pm, pmd) = match pert {
                Some(p) => {
                    let (v, d, _) = p.pelvis.eval_all(t);
                    (v, d)
                }
                None => (pu, pud),
            };
            let tq = feedback_torques(
                params,
                &joint_angles(&state.q, pm),
                &joint_rates(&state.qdot, pmd),
                &joint_angles(&rs.q, pu),
                &joint_rates(&rs.qdot, pud),
            );
            let mut u = Vector4::new(u_ff[0].eval(t), u_ff[1].eval(t), u_ff[2].eval(t), u_ff[3].eval(t))
                + torques_to_genforce(&tq).to_vector();
            if let Some(p) = pert {
                u += jt_f(model, p.thigh(t), &p.force(t)) - jt_f(model, reference.thigh(t), &reference.force(t));
            }
            let m = mass_matrix(model, &state.q);
            let (c, g) = bias_forces(model, &state);
            let rhs = -c + g + u;
            let qdd = match m.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => Vector4::repeat(f64::NAN),
            };
            [y[4], y[5], y[6], y[7], qdd[0], qdd[1], qdd[2], qdd[3]]
        };
        let breaks: Vec<f64> = self.window_times(a, b);
        let (ys, _) = ode::integrate(rhs, start, y0, &times, &breaks, &self.opts.tol)?;
        let pelvis = |t: f64| match pert {
            Some(p) => p.pelvis.eval(t),
            None => reference.pelvis.eval(t),
        };
        let mut trace = SimTrace {
            t: times.clone(),
            q: Vec::with_capacity(ys.len()),
            qdot: Vec::with_capacity(ys.len()),
            angles: Vec::with_capacity(ys.len()),
        };
        for (t, y) in times.iter().zip(&ys) {
            let q = GenCoord::new(y[0], y[1], y[2], y[3]);
            if !q.is_finite() {
                return Err(Error::Integration {
                    t: *t,
                    reason: "non-finite state".into(),
                });
            }
            trace.q.push(q);
            trace.qdot.push(GenCoord::new(y[4], y[5], y[6], y[7]));
            trace.angles.push(joint_angles(&q, pelvis(*t)));
        }
        Ok(trace)
    }
}

fn jt_f(model: &BodyModel, thigh: f64, f: &ExternalForce) -> Vector4<f64> {
    let j: Matrix2x4<f64> = interaction_jacobian(model, &GenCoord::new(0.0, thigh, 0.0, 0.0));
    j.transpose() * f.to_vector()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hanging(n: usize) -> Trajectory {
        Trajectory::new(
            0.0,
            1.0 / 128.0,
            vec![GenCoord::default(); n],
            vec![0.0; n],
            vec![ExternalForce::default(); n],
        )
        .unwrap()
    }

    #[test]
    fn static_equilibrium_needs_no_force() {
        let m = BodyModel::reference_adult();
        let ff = inverse_dynamics(&m, &hanging(40), &InverseDynamicsOptions::default()).unwrap();
        for u in ff.u {
            assert_eq!(u, GenForce::default());
        }
    }

    #[test]
    fn constant_cart_acceleration() {
        let m = BodyModel::reference_adult();
        let a = 1.5;
        let n = 200;
        let dt = 1.0 / 128.0;
        let q = (0..n)
            .map(|i| GenCoord::new(0.5 * a * (i as f64 * dt).powi(2), 0.0, 0.0, 0.0))
            .collect();
        let tr = Trajectory::new(0.0, dt, q, vec![0.0; n], vec![ExternalForce::default(); n]).unwrap();
        // the zero-phase filter's edge transient decays into the interior
        for (opts, rel) in [
            (InverseDynamicsOptions::default(), 1e-5),
            (
                InverseDynamicsOptions {
                    cutoff_hz: None,
                    ..Default::default()
                },
                1e-9,
            ),
        ] {
            let ff = inverse_dynamics(&m, &tr, &opts).unwrap();
            for u in &ff.u[50..n - 50] {
                assert!((u.pelvis - m.total_mass() * a).abs() < rel * m.total_mass() * a);
                let m10 = mass_matrix(&m, &GenCoord::default())[(1, 0)];
                assert!((u.thigh - m10 * a).abs() < rel * m.total_mass() * a);
            }
        }
    }

    #[test]
    fn too_short_for_inverse_dynamics() {
        let m = BodyModel::reference_adult();
        let tr = hanging(4);
        assert!(inverse_dynamics(&m, &tr, &InverseDynamicsOptions::default()).is_err());
    }

    #[test]
    fn feedback_law_examples() {
        let zero = JointAngles::default();
        let p = ImpedanceParams::new([50.0, 10.0, 5.0], [1.0, 2.0, 3.0]);
        let a = JointAngles::new(0.3, -0.2, 0.1);
        let t = feedback_torques(&p, &a, &a, &a, &a);
        assert_eq!(t, JointTorques::default());
        let t = feedback_torques(&p, &JointAngles::new(0.1, 0.0, 0.0), &zero, &zero, &zero);
        assert!((t.hip + 5.0).abs() < 1e-12);
        let rate = JointAngles::new(0.5, -1.0, 2.0);
        let t1 = feedback_torques(&p, &a, &rate, &zero, &zero);
        let p2 = ImpedanceParams::from_array(&p.to_array().map(|v| 2.0 * v));
        let t2 = feedback_torques(&p2, &a, &rate, &zero, &zero);
        assert!((t2.hip - 2.0 * t1.hip).abs() < 1e-12);
        assert!((t2.knee - 2.0 * t1.knee).abs() < 1e-12);
        assert!((t2.ankle - 2.0 * t1.ankle).abs() < 1e-12);
    }

    #[test]
    fn window_indices_inclusive() {
        let tr = hanging(100);
        let r = tr.window_indices(0.25, 0.5);
        assert_eq!(*r.start(), 32);
        assert_eq!(*r.end(), 64);
    }

    #[test]
    fn bounds() {
        assert!(ImpedanceParams::new([200.0, 0.0, 10.0], [10.0, 0.0, 1.0]).within_bounds());
        assert!(!ImpedanceParams::new([201.0, 0.0, 10.0], [1.0, 0.0, 1.0]).within_bounds());
        assert!(!ImpedanceParams::new([1.0, 0.0, 10.0], [-0.1, 0.0, 1.0]).within_bounds());
    }

    #[test]
    fn trajectory_text_round_trip() {
        let q: Vec<GenCoord> = (0..5)
            .map(|i| GenCoord::new(0.01 * i as f64, 0.3, -0.1 / 3.0, 0.2 + i as f64 * 1e-3))
            .collect();
        let tr = Trajectory::new(
            -0.1,
            1.0 / 128.0,
            q,
            vec![0.02; 5],
            vec![ExternalForce::new(1.5, -0.25); 5],
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write(&mut buf).unwrap();
        let back = parse_trajectory(std::str::from_utf8(&buf).unwrap(), "t.csv").unwrap();
        assert_eq!(back.q, tr.q);
        assert_eq!(back.force, tr.force);
        assert!((back.dt - tr.dt).abs() < 1e-15 && (back.t0 - tr.t0).abs() < 1e-15);
    }
}
