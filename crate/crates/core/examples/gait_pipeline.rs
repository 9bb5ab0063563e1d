//! Treadmill recording to identification input: gait events, strides,
//! outlier rejection and per-onset averaged swings.
//!
//! ```text
//! cargo run --example gait_pipeline -- [recording.csv]
//! ```

use std::path::PathBuf;

use swing_impedance::gaitproc::{onset_datasets, preprocess, read_recording, PreprocessOptions};

fn main() -> swing_impedance::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/gait_perturbed.csv"));
    let opts = PreprocessOptions::default();
    let pre = preprocess(&read_recording(&path)?, &opts)?;
    let perturbed = pre.strides.iter().filter(|s| s.is_perturbed()).count();
    println!(
        "{} events, {} strides ({perturbed} perturbed), {} kept, {} outliers",
        pre.events.len(),
        pre.strides.len(),
        pre.kept.len(),
        pre.discarded.len()
    );
    let mean_swing = pre.kept.iter().map(|&i| pre.strides[i].swing_duration()).sum::<f64>() / pre.kept.len() as f64;
    println!("mean swing time {mean_swing:.3} s");
    for d in onset_datasets(&pre, &opts)? {
        println!(
            "onset {:.4} s, {} N: {} pairs, {} removed, {} samples from {:.3} s",
            d.onset,
            d.amplitude,
            d.perturbed.len(),
            d.removed.len(),
            d.perturbed_mean.len(),
            d.perturbed_mean.t0
        );
    }
    Ok(())
}
