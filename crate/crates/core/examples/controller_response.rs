//! Admittance-controlled perturbator on the simulated plant: a 40 N step and
//! the force-tracking frequency response under band-limited noise.
//!
//! ```text
//! cargo run --release --example controller_response
//! ```

use swing_impedance::ctrlsim::{
    loop_frf, simulate_loop, step_metrics, ControllerParams, LoopScenario, PlantModel, PvaLimits,
};
use swing_impedance::model::BodyModel;

fn main() -> swing_impedance::Result<()> {
    let p = ControllerParams::default();
    let limits = PvaLimits::default();
    let plant = PlantModel::from_body(&BodyModel::reference_adult());

    let step = LoopScenario::step(40.0);
    let fd = step.desired_force(p.sample_rate)?;
    let tr = simulate_loop(&p, &limits, &plant, &fd)?;
    let (k, w) = step.step_range(p.sample_rate).expect("step inside the run");
    let m = step_metrics(&tr.measured[k..k + w], tr.dt)?;
    println!(
        "40 N step: steady state {:.1} N, rise {:.1} ms, overshoot {:.1} %",
        m.steady_state,
        m.rise_time * 1e3,
        m.overshoot
    );

    let noise = LoopScenario::noise(60.0, 0);
    let fd = noise.desired_force(p.sample_rate)?;
    let tr = simulate_loop(&p, &limits, &plant, &fd)?;
    let s = loop_frf(&fd, &tr.measured, p.sample_rate, noise.frf_segment, noise.frf_overlap)?;
    match s.bandwidth {
        Some(bw) => println!("bandwidth {bw:.1} Hz (low-frequency gain {:.3})", s.low_frequency_gain),
        None => println!("no -3 dB crossing below Nyquist"),
    }
    for f in [1.0, 10.0, 20.0, 40.0, 80.0] {
        let i = s.frf.freq.iter().position(|&x| x >= f).unwrap_or(s.frf.freq.len() - 1);
        println!("{:6.1} Hz  {:6.2} dB", s.frf.freq[i], 20.0 * s.frf.h[i].norm().log10());
    }
    Ok(())
}
