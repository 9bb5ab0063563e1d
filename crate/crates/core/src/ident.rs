//! Prediction-error identification of joint stiffness and damping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::dynamics::{
    inverse_dynamics, smooth_kinematics, Condition, FeedForward, ImpedanceParams, InverseDynamicsOptions, SimOptions,
    Simulator, Trajectory,
};
use crate::error::{Error, Result};
use crate::lsq::{least_squares, LsqOptions, Termination};
use crate::model::{BodyModel, JointAngles};
use crate::signal::{stats, DiffScheme};

/// Analysis window relative to the perturbation onset (s).
pub const WINDOW_BEFORE: f64 = 0.025;
pub const WINDOW_AFTER: f64 = 0.250;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentOptions {
    pub n_restarts: usize,
    pub seed: u64,
    pub lsq: LsqOptions,
    pub sim: SimOptions,
    pub inverse: InverseDynamicsOptions,
}

impl Default for IdentOptions {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            seed: 0,
            lsq: LsqOptions::default(),
            sim: SimOptions::default(),
            inverse: InverseDynamicsOptions::default(),
        }
    }
}

impl IdentOptions {
    /// Keys: `ident.restarts`, `ident.max_iter`, `ident.seed`,
    /// `ident.diff_scheme` (`central2` or `central4`), `ident.filter_cutoff`
    /// (Hz, 0 disables the kinematic low-pass) and `ident.filter_order`.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut o = Self::default();
        o.n_restarts = cfg.usize_or("ident.restarts", o.n_restarts)?;
        o.lsq.max_iter = cfg.usize_or("ident.max_iter", o.lsq.max_iter)?;
        o.seed = cfg.u64_or("ident.seed", o.seed)?;
        if let Some(s) = cfg.str("ident.diff_scheme")? {
            o.inverse.scheme = DiffScheme::parse(s)?;
        }
        let fc = cfg.f64_or("ident.filter_cutoff", o.inverse.cutoff_hz.unwrap_or(0.0))?;
        o.inverse.cutoff_hz = (fc > 0.0).then_some(fc);
        o.inverse.filter_order = cfg.usize_or("ident.filter_order", o.inverse.filter_order)?;
        if o.n_restarts == 0 || o.lsq.max_iter == 0 || o.inverse.filter_order == 0 || !(fc >= 0.0) {
            return Err(Error::Config(
                "ident.restarts, ident.max_iter and ident.filter_order must be positive".into(),
            ));
        }
        Ok(o)
    }
}

/// One perturbation experiment: paired swings, onset and feed-forward forces.
#[derive(Debug, Clone)]
pub struct IdentProblem {
    pub model: BodyModel,
    pub unperturbed: Trajectory,
    pub perturbed: Trajectory,
    pub onset: f64,
    pub u_ff: FeedForward,
    pub inverse: InverseDynamicsOptions,
}

impl IdentProblem {
    /// Builds the problem and recovers `u_ff` from the unperturbed swing.
    pub fn new(
        model: BodyModel,
        unperturbed: Trajectory,
        perturbed: Trajectory,
        onset: f64,
        inverse: InverseDynamicsOptions,
    ) -> Result<Self> {
        let u_ff = inverse_dynamics(&model, &unperturbed, &inverse)?;
        let p = Self {
            model,
            unperturbed,
            perturbed,
            onset,
            u_ff,
            inverse,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.onset - WINDOW_BEFORE, self.onset + WINDOW_AFTER)
    }

    fn validate(&self) -> Result<()> {
        let (u, p) = (&self.unperturbed, &self.perturbed);
        if u.len() != p.len() || (u.dt - p.dt).abs() > 1e-12 * u.dt || (u.t0 - p.t0).abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "perturbed and unperturbed swings must share one time grid".into(),
            ));
        }
        let (a, b) = self.window();
        if !(self.onset.is_finite() && a >= u.t0 - 1e-9 && b <= u.t_end() + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "analysis window [{a:.4}, {b:.4}] s is outside the data [{:.4}, {:.4}] s",
                u.t0,
                u.t_end()
            )));
        }
        Ok(())
    }

    /// Number of grid samples in the analysis window.
    pub fn window_len(&self) -> usize {
        let (a, b) = self.window();
        self.unperturbed.window_indices(a, b).count()
    }

    /// Measured difference response `θ_p - θ_u` per joint over the window.
    pub fn measured_difference(&self) -> [Vec<f64>; 3] {
        let (a, b) = self.window();
        let au = self.unperturbed.joint_angles();
        let ap = self.perturbed.joint_angles();
        let idx: Vec<usize> = self.unperturbed.window_indices(a, b).collect();
        let diff = |f: fn(&JointAngles) -> f64| idx.iter().map(|&i| f(&ap[i]) - f(&au[i])).collect();
        [diff(|j| j.hip), diff(|j| j.knee), diff(|j| j.ankle)]
    }
}

/// Evaluates prediction errors of one problem for many parameter sets.
pub struct PredictionError {
    sim: Simulator,
    window: (f64, f64),
    measured: [Vec<f64>; 3],
}

impl PredictionError {
    pub fn new(problem: &IdentProblem, sim: SimOptions) -> Result<Self> {
        // the simulated reference and initial state use the same low-pass
        // filtered kinematics the feed-forward forces were derived from
        let reference = smooth_kinematics(&problem.unperturbed, &problem.inverse)?;
        let perturbed = smooth_kinematics(&problem.perturbed, &problem.inverse)?;
        let simulator = Simulator::new(problem.model, &reference, &problem.u_ff, Some(&perturbed), sim)?;
        Ok(Self {
            sim: simulator,
            window: problem.window(),
            measured: problem.measured_difference(),
        })
    }

    pub fn measured(&self) -> &[Vec<f64>; 3] {
        &self.measured
    }

    /// Simulated difference response `θ_p - θ_u` per joint.
    pub fn predicted(&self, params: &ImpedanceParams) -> Result<[Vec<f64>; 3]> {
        let u = self.sim.simulate(params, Condition::Unperturbed, self.window)?;
        let p = self.sim.simulate(params, Condition::Perturbed, self.window)?;
        let n = self.measured[0].len();
        if u.angles.len() != n || p.angles.len() != n {
            return Err(Error::Numerical("simulated window length mismatch".into()));
        }
        let diff = |f: fn(&JointAngles) -> f64| -> Vec<f64> {
            p.angles.iter().zip(&u.angles).map(|(a, b)| f(a) - f(b)).collect()
        };
        Ok([diff(|j| j.hip), diff(|j| j.knee), diff(|j| j.ankle)])
    }

    /// Residual stacked as all hip samples, then knee, then ankle.
    pub fn residual(&self, params: &ImpedanceParams) -> Result<Vec<f64>> {
        let pred = self.predicted(params)?;
        let mut r = Vec::with_capacity(3 * self.measured[0].len());
        for (m, p) in self.measured.iter().zip(&pred) {
            r.extend(m.iter().zip(p).map(|(m, p)| m - p));
        }
        Ok(r)
    }
}

/// `PE = (θ_p^e - θ_u^e) - (θ_p^m - θ_u^m)` for hip, knee and ankle, stacked.
pub fn prediction_error(problem: &IdentProblem, params: &ImpedanceParams) -> Result<Vec<f64>> {
    PredictionError::new(problem, SimOptions::default())?.residual(params)
}

/// Variance accounted for, in percent. `NaN` when `measured` has no variance.
pub fn vaf(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.len() != predicted.len() || measured.len() < 2 {
        return Err(Error::InvalidInput("VAF needs two series of equal length >= 2".into()));
    }
    let vm = stats::variance(measured, 0);
    if vm == 0.0 {
        return Ok(f64::NAN);
    }
    let resid: Vec<f64> = measured.iter().zip(predicted).map(|(m, p)| m - p).collect();
    Ok(100.0 * (1.0 - stats::variance(&resid, 0) / vm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartInfo {
    pub initial: ImpedanceParams,
    pub estimate: ImpedanceParams,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    pub at_bound: [bool; 6],
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentResult {
    pub params: ImpedanceParams,
    /// Hip, knee, ankle.
    pub vaf: [f64; 3],
    /// `false` where the measured difference response had zero variance.
    pub vaf_defined: [bool; 3],
    /// Squared 2-norm of the prediction error at `params`.
    pub residual_norm: f64,
    pub restarts: Vec<RestartInfo>,
    pub best_index: usize,
    pub at_bound: [bool; 6],
}

/// Initial guess of restart `index`: uniform over the parameter box, drawn
/// from stream `index` of the master seed so that adding restarts leaves the
/// earlier ones unchanged.
pub fn initial_guess(seed: u64, index: usize) -> ImpedanceParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let ub = ImpedanceParams::upper_bounds();
    let p: [f64; 6] = std::array::from_fn(|i| rng.random::<f64>() * ub[i]);
    ImpedanceParams::from_array(&p)
}

/// Fits stiffness and damping from `n_restarts` random starts and keeps the
/// best converged fit.
pub fn identify(problem: &IdentProblem, opts: &IdentOptions) -> Result<IdentResult> {
    let pe = PredictionError::new(problem, opts.sim)?;
    let restarts = run_restarts(&pe, opts)?;
    best_fit(&pe, restarts)
}

/// Runs every restart in parallel; failed restarts are recorded, not raised.
pub fn run_restarts(pe: &PredictionError, opts: &IdentOptions) -> Result<Vec<RestartInfo>> {
    if opts.n_restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    let lb = ImpedanceParams::lower_bounds();
    let ub = ImpedanceParams::upper_bounds();
    Ok((0..opts.n_restarts)
        .into_par_iter()
        .map(|r| {
            let initial = initial_guess(opts.seed, r);
            let f = |x: &[f64]| {
                let p = ImpedanceParams::from_array(&x.try_into().expect("6 parameters"));
                pe.residual(&p)
            };
            match least_squares(f, &initial.to_array(), &lb, &ub, &opts.lsq) {
                Ok(fit) => RestartInfo {
                    initial,
                    estimate: ImpedanceParams::from_array(&fit.x.clone().try_into().expect("6 parameters")),
                    cost: fit.cost,
                    converged: fit.termination.converged(),
                    iterations: fit.iterations,
                    evaluations: fit.evaluations,
                    termination: Some(fit.termination),
                    at_bound: fit.at_bound.try_into().expect("6 parameters"),
                    failure: None,
                },
                Err(e) => RestartInfo {
                    initial,
                    estimate: initial,
                    cost: f64::INFINITY,
                    converged: false,
                    iterations: 0,
                    evaluations: 0,
                    termination: None,
                    at_bound: [false; 6],
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Picks the best restart and evaluates its VAF.
pub fn best_fit(pe: &PredictionError, restarts: Vec<RestartInfo>) -> Result<IdentResult> {
    let best_index = select_best(&restarts).ok_or_else(|| Error::IdentificationFailed {
        restarts: restarts.len(),
        best_cost: restarts.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min),
    })?;
    let best = &restarts[best_index];
    let pred = pe.predicted(&best.estimate)?;
    let mut vaf_v = [f64::NAN; 3];
    for j in 0..3 {
        vaf_v[j] = vaf(&pe.measured()[j], &pred[j])?;
    }
    Ok(IdentResult {
        params: best.estimate,
        vaf: vaf_v,
        vaf_defined: vaf_v.map(|v| !v.is_nan()),
        residual_norm: best.cost,
        at_bound: best.at_bound,
        best_index,
        restarts,
    })
}

/// Lowest cost among converged restarts; costs within 1e-12 count as equal
/// and the lower index wins.
pub fn select_best(restarts: &[RestartInfo]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in restarts.iter().enumerate() {
        if !r.converged || !r.cost.is_finite() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if r.cost < restarts[b].cost - 1e-12 => best = Some(i),
            _ => {}
        }
    }
    best
}

/// Measured and predicted difference responses for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTraces {
    pub t: Vec<f64>,
    pub measured: [Vec<f64>; 3],
    pub predicted: [Vec<f64>; 3],
}

pub fn fit_traces(problem: &IdentProblem, params: &ImpedanceParams, sim: SimOptions) -> Result<FitTraces> {
    let pe = PredictionError::new(problem, sim)?;
    let (a, b) = problem.window();
    let t = problem
        .unperturbed
        .window_indices(a, b)
        .map(|i| problem.unperturbed.time(i))
        .collect();
    Ok(FitTraces {
        t,
        measured: pe.measured().clone(),
        predicted: pe.predicted(params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vaf_examples() {
        let m = [1.0, -1.0, 2.0, -2.0];
        assert_eq!(vaf(&m, &m).unwrap(), 100.0);
        assert_eq!(vaf(&m, &[0.0; 4]).unwrap(), 0.0);
        assert!(vaf(&[1.0; 4], &[0.0; 4]).unwrap().is_nan());
        assert!(vaf(&m, &[0.0; 3]).is_err());
    }

    #[test]
    fn restart_guesses_are_prefix_stable() {
        let a: Vec<_> = (0..5).map(|r| initial_guess(7, r)).collect();
        let b: Vec<_> = (0..10).map(|r| initial_guess(7, r)).collect();
        assert_eq!(a[..], b[..5]);
        assert_ne!(initial_guess(7, 0), initial_guess(8, 0));
        for p in b {
            assert!(p.within_bounds());
        }
    }

    fn info(cost: f64, converged: bool) -> RestartInfo {
        RestartInfo {
            initial: ImpedanceParams::default(),
            estimate: ImpedanceParams::default(),
            cost,
            converged,
            iterations: 1,
            evaluations: 1,
            termination: None,
            at_bound: [false; 6],
            failure: None,
        }
    }

    #[test]
    fn best_restart_selection() {
        let r = vec![
            info(2.0, true),
            info(1.0, false),
            info(1.5, true),
            info(1.5 - 1e-13, true),
        ];
        assert_eq!(select_best(&r), Some(2));
        assert_eq!(select_best(&[info(1.0, false)]), None);
    }
}
