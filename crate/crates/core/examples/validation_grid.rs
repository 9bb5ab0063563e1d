//! Synthetic validation: simulate experiments over a grid of known
//! impedances, identify each one and summarize the errors.
//!
//! ```text
//! cargo run --release --example validation_grid -- [noise_peak_to_peak]
//! ```

use swing_impedance::model::BodyModel;
use swing_impedance::synthval::{run_validation, NoiseConfig, Scenario, ValidationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise = std::env::args().nth(1).map_or(0.0, |s| s.parse().expect("noise level"));
    let model = BodyModel::reference_adult();
    let mut cfg = ValidationConfig::new(Scenario::builtin()?);
    cfg.noise = NoiseConfig { peak_to_peak: noise };
    let rep = run_validation(&model, &cfg)?;
    println!(
        "{} combinations, {} failed, noise {noise}",
        rep.rows.len(),
        rep.failures
    );
    println!("{:>8} {:>9} {:>9} {:>9}", "", "min", "max", "std");
    for (p, name) in ["K_hip", "K_knee", "K_ankle", "D_hip", "D_knee", "D_ankle"]
        .iter()
        .enumerate()
    {
        let s = &rep.stats;
        println!("{name:>8} {:9.4} {:9.4} {:9.4}", s.min[p], s.max[p], s.std[p]);
    }
    rep.write_summary(std::io::stdout().lock())?;
    Ok(())
}
