use nalgebra::Vector4;
use proptest::prelude::*;
use rand::SeedableRng;

use swing_impedance::dynamics::{inverse_dynamics, ImpedanceParams, InverseDynamicsOptions, Trajectory};
use swing_impedance::model::{
    external_genforce, forward_acceleration, gencoord_from_joint_angles, inverse_dynamics_at, joint_angles,
    mass_matrix, BodyModel, ExternalForce, GenCoord, SegmentParams, State,
};
use swing_impedance::ode::{integrate, Tolerances};
use swing_impedance::synthval::{add_noise, simulate_swings, Scenario};

fn coord() -> impl Strategy<Value = GenCoord> {
    (-1.0..1.0, -3.2..3.2, -3.2..3.2, -3.2..3.2f64).prop_map(|(x, a, b, c)| GenCoord::new(x, a, b, c))
}

fn body() -> impl Strategy<Value = BodyModel> {
    let seg = (1.0..10.0, 0.01..0.2, 0.2..0.5, 0.2..0.8f64)
        .prop_map(|(m, i, l, f)| SegmentParams::new(m, i, l, f * l).unwrap());
    (seg.clone(), seg.clone(), seg, 20.0..80.0, 0.2..0.9f64).prop_map(|(t, s, f, cart, off)| {
        let offset = off * t.length;
        BodyModel::new(t, s, f, cart, offset).unwrap()
    })
}

proptest! {
    #[test]
    fn mass_matrix_symmetric_positive_definite(m in body(), q in coord()) {
        let mm = mass_matrix(&m, &q);
        prop_assert!((mm - mm.transpose()).abs().max() <= 1e-12 * mm.abs().max());
        prop_assert!(mm.cholesky().is_some());
    }

    #[test]
    fn forward_and_inverse_dynamics_agree(m in body(), q in coord(), v in coord(), a in coord()) {
        let state = State { q, qdot: v };
        let u = inverse_dynamics_at(&m, &state, &a.to_vector());
        let back = forward_acceleration(&m, &state, &u).unwrap();
        prop_assert!((back - a.to_vector()).abs().max() < 1e-8 * (1.0 + a.to_vector().abs().max()));
    }

    #[test]
    fn joint_angles_round_trip(q in coord(), pelvis in -0.5..0.5f64) {
        let back = gencoord_from_joint_angles(&joint_angles(&q, pelvis), pelvis, q.pelvis);
        prop_assert!((back.to_vector() - q.to_vector()).abs().max() < 1e-12);
    }

    #[test]
    fn external_force_power_matches_point_velocity(q in coord(), v in coord(), fx in -50.0..50.0f64, fy in -50.0..50.0f64) {
        // generalized force times velocity equals force times point velocity
        let m = BodyModel::reference_adult();
        let f = ExternalForce::new(fx, fy);
        let h = 1e-6;
        let p = |s: f64| swing_impedance::model::interaction_point(&m, &GenCoord::from_vector(&(q.to_vector() + s * v.to_vector())));
        let vel = (p(h) - p(-h)) / (2.0 * h);
        let lhs = external_genforce(&m, &q, &f).dot(&v.to_vector());
        prop_assert!((lhs - f.to_vector().dot(&vel)).abs() < 1e-6 * (1.0 + lhs.abs()));
    }
}

#[test]
fn inverse_dynamics_recovers_known_forcing() {
    let m = BodyModel::reference_adult();
    let u_star = |t: f64| {
        Vector4::new(
            20.0 * (3.0 * t).sin(),
            4.0 * (5.0 * t).cos(),
            -2.0 * (4.0 * t).sin(),
            0.3 * t,
        )
    };
    let dt = 1.0 / 1000.0;
    let n = 800;
    let out: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let rhs = |t: f64, y: &[f64; 8]| -> [f64; 8] {
        let s = State {
            q: GenCoord::new(y[0], y[1], y[2], y[3]),
            qdot: GenCoord::new(y[4], y[5], y[6], y[7]),
        };
        let a = forward_acceleration(&m, &s, &u_star(t)).unwrap();
        [y[4], y[5], y[6], y[7], a[0], a[1], a[2], a[3]]
    };
    let y0 = [0.0, 0.3, 0.1, 1.7, 0.0, 0.5, -0.5, 0.0];
    let (ys, _) = integrate(rhs, 0.0, y0, &out, &[], &Tolerances::default()).unwrap();
    let traj = Trajectory::new(
        0.0,
        dt,
        ys.iter().map(|y| GenCoord::new(y[0], y[1], y[2], y[3])).collect(),
        vec![0.0; n],
        vec![ExternalForce::default(); n],
    )
    .unwrap();
    let opts = InverseDynamicsOptions {
        cutoff_hz: None,
        ..InverseDynamicsOptions::default()
    };
    let ff = inverse_dynamics(&m, &traj, &opts).unwrap();
    for k in 0..4 {
        let (mut err, mut norm) = (0.0, 0.0);
        for (i, u) in ff.u.iter().enumerate() {
            let want = u_star(out[i])[k];
            err += (u.to_vector()[k] - want).powi(2);
            norm += want * want;
        }
        assert!(err.sqrt() < 0.01 * norm.sqrt(), "coordinate {k}");
    }
}

#[test]
fn noiseless_generation_passes_the_reference_through() {
    let m = BodyModel::reference_adult();
    let sc = Scenario::builtin().unwrap();
    let sw = simulate_swings(&m, &ImpedanceParams::new([20.0; 3], [1.0; 3]), &sc).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    assert_eq!(add_noise(&sw.unperturbed, 0.0, &mut rng), sw.unperturbed);
}

#[test]
fn free_leg_deviates_most() {
    let m = BodyModel::reference_adult();
    let sc = Scenario::builtin().unwrap();
    let peak = |p: ImpedanceParams| {
        let sw = simulate_swings(&m, &p, &sc).unwrap();
        let (u, q) = (sw.unperturbed.joint_angles(), sw.perturbed.joint_angles());
        u.iter()
            .zip(&q)
            .fold(0.0f64, |acc, (a, b)| acc.max((b.hip - a.hip).abs()))
    };
    let free = peak(ImpedanceParams::new([0.0; 3], [0.0; 3]));
    for k in [75.0, 150.0] {
        for d in [0.0, 2.0, 4.0] {
            let other = peak(ImpedanceParams::new([k, 0.0, 0.0], [d, 0.0, 0.0]));
            assert!(free > other, "K_hip {k}, D_hip {d}: {free} vs {other}");
        }
    }
}
