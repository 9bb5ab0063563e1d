//! Free swing of the leg model from a flexed pose: mass matrix at the start
//! and energy bookkeeping along the way.
//!
//! ```text
//! cargo run --example swing_dynamics
//! ```

use nalgebra::Vector4;
use swing_impedance::model::{
    forward_acceleration, joint_angles, mass_matrix, mechanical_energy, BodyModel, GenCoord, State,
};
use swing_impedance::ode::{integrate, Tolerances};

fn main() -> swing_impedance::Result<()> {
    let model = BodyModel::reference_adult();
    let start = State {
        q: GenCoord::new(0.0, 0.5, -0.3, 1.2),
        qdot: GenCoord::default(),
    };
    println!("mass matrix at start:{}", mass_matrix(&model, &start.q));

    let rhs = |_t: f64, y: &[f64; 8]| {
        let s = State {
            q: GenCoord::new(y[0], y[1], y[2], y[3]),
            qdot: GenCoord::new(y[4], y[5], y[6], y[7]),
        };
        let a = forward_acceleration(&model, &s, &Vector4::zeros()).expect("mass matrix is positive definite");
        [y[4], y[5], y[6], y[7], a[0], a[1], a[2], a[3]]
    };
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
    let y0 = [0.0, 0.5, -0.3, 1.2, 0.0, 0.0, 0.0, 0.0];
    let (ys, stats) = integrate(rhs, 0.0, y0, &times, &[], &Tolerances::default())?;

    let e0 = mechanical_energy(&model, &start);
    println!(
        "{:>5} {:>8} {:>8} {:>8} {:>8} {:>12}",
        "t", "hip", "knee", "ankle", "cart", "dE/E0"
    );
    for (t, y) in times.iter().zip(&ys) {
        let s = State {
            q: GenCoord::new(y[0], y[1], y[2], y[3]),
            qdot: GenCoord::new(y[4], y[5], y[6], y[7]),
        };
        let j = joint_angles(&s.q, 0.0);
        let de = (mechanical_energy(&model, &s) - e0) / e0;
        println!(
            "{t:5.2} {:8.4} {:8.4} {:8.4} {:8.4} {de:12.2e}",
            j.hip, j.knee, j.ankle, s.q.pelvis
        );
    }
    println!("{} steps, {} rejected", stats.accepted, stats.rejected);
    Ok(())
}
