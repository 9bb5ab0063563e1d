use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{BodyModel, GRAVITY};

/// Velocity-controlled motor driving the thigh cuff through a crank and
/// coupler rod, with the relaxed leg hanging from the hip as load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    /// Proportional gain of the drive's velocity loop (N·m·s/rad).
    pub velocity_gain: f64,
    /// Time constant of the unloaded velocity loop (s); sets the motor
    /// inertia to `velocity_gain * velocity_lag`.
    pub velocity_lag: f64,
    /// Control ticks between computing a command and applying it.
    pub delay_ticks: usize,
    pub crank: f64,
    pub coupler: f64,
    /// Cuff and brace compliance (N/m, N·s/m).
    pub cuff_stiffness: f64,
    pub cuff_damping: f64,
    /// Hip-to-cuff distance (m).
    pub attachment: f64,
    pub leg_inertia: f64,
    /// `Σ m r` of the leg about the hip (kg·m).
    pub leg_first_moment: f64,
    /// Passive hip stiffness and damping of the relaxed leg.
    pub hip_stiffness: f64,
    pub hip_damping: f64,
    /// Exact crank-coupler geometry instead of a constant moment arm.
    pub nonlinear_linkage: bool,
    /// Integration substeps per control tick.
    pub substeps: usize,
}

impl PlantModel {
    pub fn from_body(model: &BodyModel) -> Self {
        let (inertia, first) = model.rigid_leg_about_hip();
        Self {
            velocity_gain: 300.0,
            velocity_lag: 0.002,
            delay_ticks: 1,
            crank: 0.45,
            coupler: 0.84,
            cuff_stiffness: 20_000.0,
            cuff_damping: 10.0,
            attachment: model.interaction_offset,
            leg_inertia: inertia,
            leg_first_moment: first,
            hip_stiffness: 50.0,
            hip_damping: 6.0,
            nonlinear_linkage: false,
            substeps: 10,
        }
    }

    /// Plant keys under `plant.*`; the leg comes from the body model in `cfg`.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::from_body(&BodyModel::from_config(cfg)?);
        let p = Self {
            velocity_gain: cfg.f64_or("plant.velocity_gain", d.velocity_gain)?,
            velocity_lag: cfg.f64_or("plant.velocity_lag", d.velocity_lag)?,
            delay_ticks: cfg.usize_or("plant.delay_ticks", d.delay_ticks)?,
            crank: cfg.f64_or("plant.crank", d.crank)?,
            coupler: cfg.f64_or("plant.coupler", d.coupler)?,
            cuff_stiffness: cfg.f64_or("plant.cuff_stiffness", d.cuff_stiffness)?,
            cuff_damping: cfg.f64_or("plant.cuff_damping", d.cuff_damping)?,
            attachment: d.attachment,
            leg_inertia: d.leg_inertia,
            leg_first_moment: d.leg_first_moment,
            hip_stiffness: cfg.f64_or("plant.hip_stiffness", d.hip_stiffness)?,
            hip_damping: cfg.f64_or("plant.hip_damping", d.hip_damping)?,
            nonlinear_linkage: cfg.bool_or("plant.nonlinear_linkage", d.nonlinear_linkage)?,
            substeps: cfg.usize_or("plant.substeps", d.substeps)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.velocity_gain,
            self.velocity_lag,
            self.crank,
            self.coupler,
            self.cuff_stiffness,
            self.attachment,
            self.leg_inertia,
            self.leg_first_moment,
        ];
        let nonneg = [self.cuff_damping, self.hip_stiffness, self.hip_damping];
        if pos.iter().any(|x| !(*x > 0.0 && x.is_finite()))
            || nonneg.iter().any(|x| !(*x >= 0.0 && x.is_finite()))
            || self.substeps == 0
        {
            return Err(Error::Config(
                "plant parameters must be positive (damping and passive hip terms nonnegative)".into(),
            ));
        }
        Ok(())
    }

    pub fn motor_inertia(&self) -> f64 {
        self.velocity_gain * self.velocity_lag
    }

    /// Interaction force along the rod (N, positive pushing the leg forward),
    /// the torque it exerts per newton on the motor and on the hip.
    pub fn interaction(&self, s: &PlantState) -> (f64, f64, f64) {
        let (d, r) = (self.attachment, self.crank);
        let (sp, cp) = s.leg.sin_cos();
        if !self.nonlinear_linkage {
            let f = self.cuff_stiffness * (r * s.motor - d * sp)
                + self.cuff_damping * (r * s.motor_rate - d * cp * s.leg_rate);
            return (f, r, d * cp);
        }
        // motor axis sits so the coupler is horizontal when both angles are zero
        let (st, ct) = s.motor.sin_cos();
        let b = [-self.coupler + r * st, -d - r + r * ct];
        let p = [d * sp, -d * cp];
        let e = [p[0] - b[0], p[1] - b[1]];
        let len = e[0].hypot(e[1]);
        let u = [e[0] / len, e[1] / len];
        let db = [r * ct, -r * st];
        let dp = [d * cp, d * sp];
        let len_rate =
            u[0] * (dp[0] * s.leg_rate - db[0] * s.motor_rate) + u[1] * (dp[1] * s.leg_rate - db[1] * s.motor_rate);
        let f = self.cuff_stiffness * (self.coupler - len) - self.cuff_damping * len_rate;
        (f, db[0] * u[0] + db[1] * u[1], p[0] * u[1] - p[1] * u[0])
    }

    /// Moment arm mapping the force error to the admittance input torque.
    pub fn moment_arm(&self, s: &PlantState) -> f64 {
        if self.nonlinear_linkage {
            self.interaction(s).1
        } else {
            self.crank
        }
    }

    pub fn derivative(&self, s: &PlantState, command: f64) -> PlantState {
        let (f, motor_arm, leg_arm) = self.interaction(s);
        let motor_acc = (self.velocity_gain * (command - s.motor_rate) - motor_arm * f) / self.motor_inertia();
        let leg_acc = (leg_arm * f
            - self.leg_first_moment * GRAVITY * s.leg.sin()
            - self.hip_stiffness * s.leg
            - self.hip_damping * s.leg_rate)
            / self.leg_inertia;
        PlantState {
            motor: s.motor_rate,
            motor_rate: motor_acc,
            leg: s.leg_rate,
            leg_rate: leg_acc,
        }
    }

    /// Advances `dt` with the command held, using RK4 substeps.
    pub fn advance(&self, s: &PlantState, command: f64, dt: f64) -> PlantState {
        let h = dt / self.substeps as f64;
        let mut y = *s;
        for _ in 0..self.substeps {
            let k1 = self.derivative(&y, command);
            let k2 = self.derivative(&y.add(&k1, 0.5 * h), command);
            let k3 = self.derivative(&y.add(&k2, 0.5 * h), command);
            let k4 = self.derivative(&y.add(&k3, h), command);
            y = PlantState {
                motor: y.motor + h / 6.0 * (k1.motor + 2.0 * k2.motor + 2.0 * k3.motor + k4.motor),
                motor_rate: y.motor_rate
                    + h / 6.0 * (k1.motor_rate + 2.0 * k2.motor_rate + 2.0 * k3.motor_rate + k4.motor_rate),
                leg: y.leg + h / 6.0 * (k1.leg + 2.0 * k2.leg + 2.0 * k3.leg + k4.leg),
                leg_rate: y.leg_rate + h / 6.0 * (k1.leg_rate + 2.0 * k2.leg_rate + 2.0 * k3.leg_rate + k4.leg_rate),
            };
        }
        y
    }

    /// Motor torque demanded by the velocity loop.
    pub fn motor_torque(&self, s: &PlantState, command: f64) -> f64 {
        self.velocity_gain * (command - s.motor_rate)
    }
}

/// Motor angle (rad) and leg angle from vertical (rad, forward positive)
/// with their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub motor: f64,
    pub motor_rate: f64,
    pub leg: f64,
    pub leg_rate: f64,
}

impl PlantState {
    fn add(&self, d: &PlantState, h: f64) -> PlantState {
        PlantState {
            motor: self.motor + h * d.motor,
            motor_rate: self.motor_rate + h * d.motor_rate,
            leg: self.leg + h * d.leg,
            leg_rate: self.leg_rate + h * d.leg_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.motor.is_finite() && self.motor_rate.is_finite() && self.leg.is_finite() && self.leg_rate.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linkages_agree_near_neutral() {
        let lin = PlantModel::from_body(&BodyModel::reference_adult());
        let non = PlantModel {
            nonlinear_linkage: true,
            ..lin
        };
        let s = PlantState {
            motor: 1e-4,
            motor_rate: 0.01,
            leg: -2e-4,
            leg_rate: 0.02,
        };
        let (a, b) = (lin.interaction(&s), non.interaction(&s));
        assert!((a.0 - b.0).abs() < 1e-3 * a.0.abs().max(1.0), "{a:?} {b:?}");
        assert!((a.1 - b.1).abs() < 1e-6);
        assert!((a.2 - b.2).abs() < 1e-6);
    }

    #[test]
    fn rest_is_equilibrium() {
        let p = PlantModel::from_body(&BodyModel::reference_adult());
        let s = PlantState::default();
        assert_eq!(p.advance(&s, 0.0, 0.001), s);
    }
}
