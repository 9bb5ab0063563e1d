//! Recovers feed-forward forces from a swing by inverse dynamics, then drives
//! the model open-loop with them and compares the replayed joint angles.
//!
//! ```text
//! cargo run --example feedforward_round_trip
//! ```

use swing_impedance::dynamics::{
    inverse_dynamics, Condition, ImpedanceParams, InverseDynamicsOptions, SimOptions, Simulator,
};
use swing_impedance::model::BodyModel;
use swing_impedance::synthval::{simulate_swings, Scenario};

fn main() -> swing_impedance::Result<()> {
    let model = BodyModel::reference_adult();
    let sc = Scenario::builtin()?;
    let swing = simulate_swings(&model, &ImpedanceParams::new([50.0, 5.0, 15.0], [3.0, 0.1, 1.0]), &sc)?.unperturbed;

    let opts = InverseDynamicsOptions {
        cutoff_hz: None,
        ..Default::default()
    };
    let u_ff = inverse_dynamics(&model, &swing, &opts)?;
    let peak = |k: usize| u_ff.u.iter().fold(0.0f64, |m, u| m.max(u.to_vector()[k].abs()));
    println!(
        "peak |u_ff|: cart {:.1} N, thigh {:.2}, shank {:.2}, foot {:.3} N*m",
        peak(0),
        peak(1),
        peak(2),
        peak(3)
    );

    let sim = Simulator::new(model, &swing, &u_ff, None, SimOptions::default())?;
    let free = ImpedanceParams::new([0.0; 3], [0.0; 3]);
    let source = swing.joint_angles();
    for a in [0.0, 0.2, 0.4] {
        let w = (swing.t0 + a, swing.t0 + a + 0.25);
        let tr = sim.simulate(&free, Condition::Unperturbed, w)?;
        let err = tr
            .angles
            .iter()
            .zip(swing.window_indices(w.0, w.1))
            .map(|(s, i)| (s.hip - source[i].hip).abs().max((s.knee - source[i].knee).abs()))
            .fold(0.0f64, f64::max);
        println!(
            "window [{:.3}, {:.3}] s: max hip/knee deviation {err:.2e} rad",
            w.0, w.1
        );
    }
    Ok(())
}
