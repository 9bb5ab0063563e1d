//! Planar swing-leg model: a thigh-shank-foot triple pendulum hanging from a
//! horizontally sliding cart that stands in for the rest of the body.
//!
//! Generalized coordinates are the cart position and the three segment angles
//! in the global frame. Segment angles are measured from the downward vertical
//! and increase when the distal end of the segment moves backward (against the
//! walking direction, `+x`), so a segment with angle `phi` points along
//! `(-sin phi, -cos phi)`. With this orientation the hip angle
//! `pelvis - q_thigh` increases when the thigh swings forward (flexion) and the
//! hanging configuration `q = 0` is the gravitational equilibrium.
//!
//! The equations of motion have the form `M(q) qdd = -C(q, qd) + G(q) + u + J(q)^T F`.

use nalgebra::{Matrix2x4, Matrix4, Vector2, Vector4};

use crate::config::Config;
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Inertial and geometric parameters of one leg segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// kg
    pub mass: f64,
    /// kg·m², about the center of mass, out-of-plane axis
    pub inertia_com: f64,
    /// m, proximal to distal joint
    pub length: f64,
    /// m, proximal joint to center of mass along the segment axis
    pub com_offset: f64,
}

impl SegmentParams {
    pub fn new(mass: f64, inertia_com: f64, length: f64, com_offset: f64) -> Result<Self> {
        let s = Self {
            mass,
            inertia_com,
            length,
            com_offset,
        };
        s.validate("segment")?;
        Ok(s)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let finite = [self.mass, self.inertia_com, self.length, self.com_offset]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!("{name}: non-finite parameter")));
        }
        if self.mass <= 0.0 {
            return Err(Error::InvalidInput(format!("{name}: mass must be > 0")));
        }
        if self.inertia_com < 0.0 {
            return Err(Error::InvalidInput(format!("{name}: inertia must be >= 0")));
        }
        if self.length <= 0.0 {
            return Err(Error::InvalidInput(format!("{name}: length must be > 0")));
        }
        if !(0.0..=self.length).contains(&self.com_offset) {
            return Err(Error::InvalidInput(format!(
                "{name}: com_offset must lie in [0, length]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyModel {
    pub thigh: SegmentParams,
    pub shank: SegmentParams,
    pub foot: SegmentParams,
    /// kg, reflected mass of the rest of the body
    pub cart_mass: f64,
    /// m, hip to the device attachment point along the thigh
    pub interaction_offset: f64,
}

/// Mass moments that appear in every dynamics term.
///
/// `first[j]` is the first moment of everything distal to (and including)
/// segment `j` about its proximal joint; `second[i][j]` the coupling terms of
/// the angular block of the mass matrix (without the `cos(q_i - q_j)` factor).
#[derive(Debug, Clone, Copy)]
struct Moments {
    first: [f64; 3],
    second: [[f64; 3]; 3],
    inertia: [f64; 3],
}

impl BodyModel {
    pub fn new(
        thigh: SegmentParams,
        shank: SegmentParams,
        foot: SegmentParams,
        cart_mass: f64,
        interaction_offset: f64,
    ) -> Result<Self> {
        let m = Self {
            thigh,
            shank,
            foot,
            cart_mass,
            interaction_offset,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the model from subject data; the cart carries the total body
    /// mass minus one swing leg.
    pub fn from_subject(
        total_mass: f64,
        thigh: SegmentParams,
        shank: SegmentParams,
        foot: SegmentParams,
        interaction_offset: f64,
    ) -> Result<Self> {
        let leg = thigh.mass + shank.mass + foot.mass;
        Self::new(thigh, shank, foot, total_mass - leg, interaction_offset)
    }

    /// A 65 kg adult with segment data in the range of scaled generic
    /// musculoskeletal models.
    pub fn reference_adult() -> Self {
        Self::from_subject(
            65.0,
            SegmentParams {
                mass: 7.0,
                inertia_com: 0.12,
                length: 0.42,
                com_offset: 0.18,
            },
            SegmentParams {
                mass: 3.0,
                inertia_com: 0.045,
                length: 0.43,
                com_offset: 0.19,
            },
            SegmentParams {
                mass: 0.95,
                inertia_com: 0.004,
                length: 0.20,
                com_offset: 0.06,
            },
            0.25,
        )
        .expect("reference model is valid")
    }

    /// Reads `model.*` keys; missing keys fall back to [`BodyModel::reference_adult`].
    ///
    /// Keys: `model.total_mass` or `model.cart_mass`, `model.interaction_offset`,
    /// and `model.{thigh,shank,foot}.{mass,inertia,length,com_offset}`.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let base = Self::reference_adult();
        let seg = |name: &str, d: SegmentParams| -> Result<SegmentParams> {
            let s = SegmentParams {
                mass: cfg.f64_or(&format!("model.{name}.mass"), d.mass)?,
                inertia_com: cfg.f64_or(&format!("model.{name}.inertia"), d.inertia_com)?,
                length: cfg.f64_or(&format!("model.{name}.length"), d.length)?,
                com_offset: cfg.f64_or(&format!("model.{name}.com_offset"), d.com_offset)?,
            };
            s.validate(name).map_err(|e| Error::Config(e.to_string()))?;
            Ok(s)
        };
        let thigh = seg("thigh", base.thigh)?;
        let shank = seg("shank", base.shank)?;
        let foot = seg("foot", base.foot)?;
        let offset = cfg.f64_or("model.interaction_offset", base.interaction_offset)?;
        let built = match (cfg.f64("model.total_mass")?, cfg.f64("model.cart_mass")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either model.total_mass or model.cart_mass, not both".into(),
                ))
            }
            (Some(total), None) => Self::from_subject(total, thigh, shank, foot, offset),
            (None, Some(cart)) => Self::new(thigh, shank, foot, cart, offset),
            (None, None) => {
                let total = base.total_mass();
                Self::from_subject(total, thigh, shank, foot, offset)
            }
        };
        built.map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        self.thigh.validate("thigh")?;
        self.shank.validate("shank")?;
        self.foot.validate("foot")?;
        if !(self.cart_mass > 0.0 && self.cart_mass.is_finite()) {
            return Err(Error::InvalidInput("cart mass must be > 0".into()));
        }
        if !(self.interaction_offset > 0.0 && self.interaction_offset <= self.thigh.length) {
            return Err(Error::InvalidInput(
                "interaction offset must lie in (0, thigh length]".into(),
            ));
        }
        Ok(())
    }

    pub fn leg_mass(&self) -> f64 {
        self.thigh.mass + self.shank.mass + self.foot.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.cart_mass + self.leg_mass()
    }

    pub fn segments(&self) -> [SegmentParams; 3] {
        [self.thigh, self.shank, self.foot]
    }

    fn moments(&self) -> Moments {
        let [t, s, f] = self.segments();
        let first = [
            t.mass * t.com_offset + (s.mass + f.mass) * t.length,
            s.mass * s.com_offset + f.mass * s.length,
            f.mass * f.com_offset,
        ];
        let m11 = t.mass * t.com_offset.powi(2) + (s.mass + f.mass) * t.length.powi(2);
        let m22 = s.mass * s.com_offset.powi(2) + f.mass * s.length.powi(2);
        let m33 = f.mass * f.com_offset.powi(2);
        let m12 = t.length * first[1];
        let m13 = t.length * first[2];
        let m23 = s.length * first[2];
        Moments {
            first,
            second: [[m11, m12, m13], [m12, m22, m23], [m13, m23, m33]],
            inertia: [t.inertia_com, s.inertia_com, f.inertia_com],
        }
    }

    /// Moment of inertia of the straight hanging leg about the hip and the
    /// first mass moment `sum(m * r)` about the hip.
    pub fn rigid_leg_about_hip(&self) -> (f64, f64) {
        let [t, s, f] = self.segments();
        let r = [
            t.com_offset,
            t.length + s.com_offset,
            t.length + s.length + f.com_offset,
        ];
        let inertia = t.inertia_com
            + s.inertia_com
            + f.inertia_com
            + t.mass * r[0].powi(2)
            + s.mass * r[1].powi(2)
            + f.mass * r[2].powi(2);
        let first = t.mass * r[0] + s.mass * r[1] + f.mass * r[2];
        (inertia, first)
    }
}

/// Generalized coordinates: cart position (m) and global segment angles (rad).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenCoord {
    pub pelvis: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

impl GenCoord {
    pub const fn new(pelvis: f64, thigh: f64, shank: f64, foot: f64) -> Self {
        Self {
            pelvis,
            thigh,
            shank,
            foot,
        }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.pelvis, self.thigh, self.shank, self.foot)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(self) -> [f64; 4] {
        [self.pelvis, self.thigh, self.shank, self.foot]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Positions and rates of the generalized coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct State {
    pub q: GenCoord,
    pub qdot: GenCoord,
}

/// Relative joint angles (rad).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointAngles {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl JointAngles {
    pub const fn new(hip: f64, knee: f64, ankle: f64) -> Self {
        Self { hip, knee, ankle }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.hip, self.knee, self.ankle]
    }
}

/// Joint torques (N·m).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointTorques {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
}

/// Generalized forces: N on the cart, N·m on the segments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenForce {
    pub pelvis: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

impl GenForce {
    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.pelvis, self.thigh, self.shank, self.foot)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            pelvis: v[0],
            thigh: v[1],
            shank: v[2],
            foot: v[3],
        }
    }
}

/// Device force at the thigh attachment point, global frame (N).
/// `fx` is positive in the walking direction, `fy` positive up.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExternalForce {
    pub fx: f64,
    pub fy: f64,
}

impl ExternalForce {
    pub const fn new(fx: f64, fy: f64) -> Self {
        Self { fx, fy }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.fx, self.fy)
    }
}

pub fn mass_matrix(model: &BodyModel, q: &GenCoord) -> Matrix4<f64> {
    let mo = model.moments();
    let ang = [q.thigh, q.shank, q.foot];
    let mut m = Matrix4::zeros();
    m[(0, 0)] = model.total_mass();
    for j in 0..3 {
        let v = -mo.first[j] * ang[j].cos();
        m[(0, j + 1)] = v;
        m[(j + 1, 0)] = v;
        for i in j..3 {
            let mut v = mo.second[i][j] * (ang[i] - ang[j]).cos();
            if i == j {
                v += mo.inertia[i];
            }
            m[(i + 1, j + 1)] = v;
            m[(j + 1, i + 1)] = v;
        }
    }
    m
}

/// Velocity-product vector `C` and gravity vector `G` of the equations of
/// motion `M qdd = -C + G + u + J^T F`.
pub fn bias_forces(model: &BodyModel, state: &State) -> (Vector4<f64>, Vector4<f64>) {
    let mo = model.moments();
    let ang = [state.q.thigh, state.q.shank, state.q.foot];
    let rate = [state.qdot.thigh, state.qdot.shank, state.qdot.foot];
    let mut c = Vector4::zeros();
    let mut g = Vector4::zeros();
    for j in 0..3 {
        c[0] += mo.first[j] * ang[j].sin() * rate[j] * rate[j];
        g[j + 1] = -GRAVITY * mo.first[j] * ang[j].sin();
        for k in 0..3 {
            if k != j {
                c[j + 1] += mo.second[j][k] * (ang[j] - ang[k]).sin() * rate[k] * rate[k];
            }
        }
    }
    (c, g)
}

/// Global position of the device attachment point on the thigh (hip at `(q_pelvis, 0)`).
pub fn interaction_point(model: &BodyModel, q: &GenCoord) -> Vector2<f64> {
    let d = model.interaction_offset;
    Vector2::new(q.pelvis - d * q.thigh.sin(), -d * q.thigh.cos())
}

/// Maps generalized velocities to the global velocity of the attachment point.
pub fn interaction_jacobian(model: &BodyModel, q: &GenCoord) -> Matrix2x4<f64> {
    let d = model.interaction_offset;
    let mut j = Matrix2x4::zeros();
    j[(0, 0)] = 1.0;
    j[(0, 1)] = -d * q.thigh.cos();
    j[(1, 1)] = d * q.thigh.sin();
    j
}

/// Generalized force produced by a device force at the attachment point.
pub fn external_genforce(model: &BodyModel, q: &GenCoord, f: &ExternalForce) -> Vector4<f64> {
    interaction_jacobian(model, q).transpose() * f.to_vector()
}

pub fn joint_angles(q: &GenCoord, pelvis_angle: f64) -> JointAngles {
    JointAngles {
        hip: pelvis_angle - q.thigh,
        knee: q.thigh - q.shank,
        ankle: q.shank - q.foot,
    }
}

/// Joint-angle rates from generalized rates; the same linear map as [`joint_angles`].
pub fn joint_rates(qdot: &GenCoord, pelvis_rate: f64) -> JointAngles {
    joint_angles(qdot, pelvis_rate)
}

/// Inverse of [`joint_angles`]: segment angles from joint angles and the pelvis angle.
/// The cart position is passed through.
pub fn gencoord_from_joint_angles(angles: &JointAngles, pelvis_angle: f64, pelvis_x: f64) -> GenCoord {
    let thigh = pelvis_angle - angles.hip;
    let shank = thigh - angles.knee;
    let foot = shank - angles.ankle;
    GenCoord::new(pelvis_x, thigh, shank, foot)
}

pub fn torques_to_genforce(t: &JointTorques) -> GenForce {
    GenForce {
        pelvis: 0.0,
        thigh: t.knee - t.hip,
        shank: t.ankle - t.knee,
        foot: -t.ankle,
    }
}

/// Generalized accelerations for total applied generalized force `u`.
pub fn forward_acceleration(model: &BodyModel, state: &State, u: &Vector4<f64>) -> Result<Vector4<f64>> {
    let m = mass_matrix(model, &state.q);
    let (c, g) = bias_forces(model, state);
    let rhs = -c + g + u;
    m.cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| Error::Numerical("mass matrix not positive definite".into()))
}

/// Generalized force needed to realize `qdd` at `state` with no device force.
pub fn inverse_dynamics_at(model: &BodyModel, state: &State, qdd: &Vector4<f64>) -> Vector4<f64> {
    let m = mass_matrix(model, &state.q);
    let (c, g) = bias_forces(model, state);
    m * qdd + c - g
}

pub fn kinetic_energy(model: &BodyModel, state: &State) -> f64 {
    let qd = state.qdot.to_vector();
    0.5 * qd.dot(&(mass_matrix(model, &state.q) * qd))
}

/// Potential energy relative to the hanging rest configuration (always >= 0).
pub fn potential_energy(model: &BodyModel, q: &GenCoord) -> f64 {
    let mo = model.moments();
    let ang = [q.thigh, q.shank, q.foot];
    (0..3).map(|j| GRAVITY * mo.first[j] * (1.0 - ang[j].cos())).sum()
}

pub fn mechanical_energy(model: &BodyModel, state: &State) -> f64 {
    kinetic_energy(model, state) + potential_energy(model, &state.q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cart_entry_is_total_mass() {
        let m = BodyModel::reference_adult();
        let q = GenCoord::new(0.3, 0.4, -0.2, 1.1);
        assert_abs_diff_eq!(mass_matrix(&m, &q)[(0, 0)], 65.0, epsilon = 1e-12);
    }

    #[test]
    fn mass_matrix_ignores_cart_position() {
        let m = BodyModel::reference_adult();
        let a = mass_matrix(&m, &GenCoord::new(0.0, 0.2, 0.2, 0.2));
        let b = mass_matrix(&m, &GenCoord::new(5.0, 0.2, 0.2, 0.2));
        assert_eq!(a, b);
    }

    #[test]
    fn no_velocity_no_coriolis() {
        let m = BodyModel::reference_adult();
        let s = State {
            q: GenCoord::new(0.1, 0.5, -0.3, 0.9),
            qdot: GenCoord::default(),
        };
        let (c, _) = bias_forces(&m, &s);
        assert_eq!(c, Vector4::zeros());
    }

    #[test]
    fn hanging_leg_is_in_equilibrium() {
        let m = BodyModel::reference_adult();
        let s = State::default();
        let qdd = forward_acceleration(&m, &s, &Vector4::zeros()).unwrap();
        assert_eq!(qdd, Vector4::zeros());
    }

    #[test]
    fn joint_angle_examples() {
        let a = joint_angles(&GenCoord::default(), 0.0);
        assert_eq!(a, JointAngles::new(0.0, 0.0, 0.0));
        let a = joint_angles(&GenCoord::new(0.0, -0.2, -0.3, -0.5), 0.1);
        assert_abs_diff_eq!(a.hip, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(a.knee, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(a.ankle, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn joint_angles_invert() {
        let q = GenCoord::new(0.02, -0.2, -0.3, -0.5);
        let back = gencoord_from_joint_angles(&joint_angles(&q, 0.1), 0.1, 0.02);
        assert_abs_diff_eq!(back.thigh, q.thigh, epsilon = 1e-15);
        assert_abs_diff_eq!(back.shank, q.shank, epsilon = 1e-15);
        assert_abs_diff_eq!(back.foot, q.foot, epsilon = 1e-15);
    }

    #[test]
    fn torque_mapping_examples() {
        assert_eq!(torques_to_genforce(&JointTorques::default()), GenForce::default());
        let u = torques_to_genforce(&JointTorques {
            hip: 1.0,
            knee: 0.0,
            ankle: 0.0,
        });
        assert_eq!(
            u,
            GenForce {
                pelvis: 0.0,
                thigh: -1.0,
                shank: 0.0,
                foot: 0.0
            }
        );
    }

    #[test]
    fn jacobian_structure() {
        let m = BodyModel::reference_adult();
        let j = interaction_jacobian(&m, &GenCoord::new(0.0, 0.7, 0.1, -0.4));
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(j[(0, 3)], 0.0);
        assert_eq!(j[(1, 3)], 0.0);
        assert_eq!(j[(0, 2)], 0.0);
    }

    #[test]
    fn forward_push_flexes_the_hip() {
        // forward force on a hanging thigh gives negative thigh acceleration,
        // i.e. increasing hip angle
        let m = BodyModel::reference_adult();
        let s = State::default();
        let u = external_genforce(&m, &s.q, &ExternalForce::new(40.0, 0.0));
        let qdd = forward_acceleration(&m, &s, &u).unwrap();
        assert!(qdd[1] < 0.0);
    }

    #[test]
    fn invalid_segments_rejected() {
        assert!(SegmentParams::new(0.0, 0.1, 0.4, 0.2).is_err());
        assert!(SegmentParams::new(1.0, -0.1, 0.4, 0.2).is_err());
        assert!(SegmentParams::new(1.0, 0.1, 0.4, 0.5).is_err());
        let t = SegmentParams::new(7.0, 0.1, 0.4, 0.2).unwrap();
        assert!(BodyModel::new(t, t, t, 50.0, 0.5).is_err());
        assert!(BodyModel::new(t, t, t, -1.0, 0.2).is_err());
    }

    #[test]
    fn config_overrides_and_cart_from_total_mass() {
        let cfg = Config::parse("model.total_mass = 70.0\nmodel.thigh.mass = 8.0\n").unwrap();
        let m = BodyModel::from_config(&cfg).unwrap();
        assert_eq!(m.thigh.mass, 8.0);
        assert_abs_diff_eq!(m.cart_mass, 70.0 - m.leg_mass(), epsilon = 1e-12);
        let bad = Config::parse("model.thigh.com_offset = 2.0").unwrap();
        assert!(BodyModel::from_config(&bad).is_err());
    }
}
