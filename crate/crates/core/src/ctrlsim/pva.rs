use crate::config::Config;
use crate::error::{Error, Result};

/// Soft limits applied to the velocity command and hard limits watched by
/// the safety monitor (rad, rad/s, rad/s², N·m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvaLimits {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
    pub hard_pos: f64,
    pub hard_vel: f64,
    pub hard_torque: f64,
    pub servo_pos: f64,
}

impl Default for PvaLimits {
    fn default() -> Self {
        Self {
            pos: 1.22,
            vel: 4.71,
            acc: 500.0,
            hard_pos: 1.31,
            #[allow(clippy::approx_constant)]
            hard_vel: 6.28,
            hard_torque: 120.0,
            servo_pos: 1.34,
        }
    }
}

impl PvaLimits {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let l = Self {
            pos: cfg.f64_or("limits.pos", d.pos)?,
            vel: cfg.f64_or("limits.vel", d.vel)?,
            acc: cfg.f64_or("limits.acc", d.acc)?,
            hard_pos: cfg.f64_or("limits.hard_pos", d.hard_pos)?,
            hard_vel: cfg.f64_or("limits.hard_vel", d.hard_vel)?,
            hard_torque: cfg.f64_or("limits.hard_torque", d.hard_torque)?,
            servo_pos: cfg.f64_or("limits.servo_pos", d.servo_pos)?,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.pos,
            self.vel,
            self.acc,
            self.hard_pos,
            self.hard_vel,
            self.hard_torque,
            self.servo_pos,
        ];
        if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("limits must be positive".into()));
        }
        if self.hard_pos < self.pos || self.hard_vel < self.vel || self.servo_pos < self.hard_pos {
            return Err(Error::Config(
                "limits must satisfy pos <= hard_pos <= servo_pos and vel <= hard_vel".into(),
            ));
        }
        Ok(())
    }

    /// Largest speed toward a bound `distance` away from which the actuator
    /// can still stop in time, braking at `acc` with commands held for `dt`.
    fn braking_speed(&self, distance: f64, dt: f64) -> f64 {
        if distance <= 0.0 {
            return 0.0;
        }
        let ad = self.acc * dt;
        (ad * ad + 2.0 * self.acc * distance).sqrt() - ad
    }
}

/// Limits a velocity command given the current position and velocity.
///
/// The command is clamped to the velocity bound, then to `current_vel ± acc·dt`,
/// then to the speed from which the actuator can still stop at the position
/// bound. The position rule wins over the acceleration rule, and at or beyond
/// a bound no velocity further out is allowed.
pub fn pva_limit(limits: &PvaLimits, command: f64, pos: f64, current_vel: f64, dt: f64) -> f64 {
    let mut v = command.clamp(-limits.vel, limits.vel);
    let dv = limits.acc * dt;
    v = v.clamp(current_vel - dv, current_vel + dv);
    v = v.min(limits.braking_speed(limits.pos - pos, dt));
    v.max(-limits.braking_speed(limits.pos + pos, dt))
}

/// First hard-limit violation seen during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyTrip {
    pub t: f64,
    pub kind: &'static str,
    pub value: f64,
}

impl PvaLimits {
    pub fn check(&self, t: f64, pos: f64, vel: f64, torque: f64) -> Option<SafetyTrip> {
        let trip = |kind, value| Some(SafetyTrip { t, kind, value });
        if pos.abs() > self.servo_pos {
            trip("servo position", pos)
        } else if pos.abs() > self.hard_pos {
            trip("position", pos)
        } else if vel.abs() > self.hard_vel {
            trip("velocity", vel)
        } else if torque.abs() > self.hard_torque {
            trip("torque", torque)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.001;

    #[test]
    fn velocity_clamp() {
        let l = PvaLimits::default();
        assert_eq!(pva_limit(&l, 10.0, 0.0, 4.71, DT), 4.71);
        assert_eq!(pva_limit(&l, -10.0, 0.0, -4.71, DT), -4.71);
    }

    #[test]
    fn at_position_bound() {
        let l = PvaLimits::default();
        assert_eq!(pva_limit(&l, 3.0, 1.22, 0.0, DT), 0.0);
        assert_eq!(pva_limit(&l, 3.0, 1.25, 0.0, DT), 0.0);
        assert!(pva_limit(&l, -3.0, 1.22, 0.0, DT) < 0.0);
    }

    #[test]
    fn braking_envelope() {
        let l = PvaLimits::default();
        let bound = (2.0f64 * 500.0 * 0.02).sqrt();
        assert!(pva_limit(&l, 4.71, 1.20, 0.0, DT) <= bound);
        let v = pva_limit(&l, 4.71, 1.20, 4.71, DT);
        assert!(v <= bound && v > 0.0);
    }

    #[test]
    fn acceleration_clamp() {
        let l = PvaLimits::default();
        assert!((pva_limit(&l, 4.0, 0.0, 0.0, DT) - 0.5).abs() < 1e-12);
    }
}
