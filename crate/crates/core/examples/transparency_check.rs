//! Compares walking with the device in minimal-impedance mode against
//! walking without it.
//!
//! ```text
//! cargo run --example transparency_check -- [device.csv no_device.csv]
//! ```

use std::path::PathBuf;

use swing_impedance::gaitproc::{preprocess, read_recording, transparency, PreprocessOptions};

fn main() -> swing_impedance::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let (dev, free) = match args.as_slice() {
        [d, n] => (d.clone(), n.clone()),
        _ => (data.join("gait_device.csv"), data.join("gait_no_device.csv")),
    };
    let opts = PreprocessOptions::default();
    let rep = transparency(
        &preprocess(&read_recording(&free)?, &opts)?,
        &preprocess(&read_recording(&dev)?, &opts)?,
    )?;
    for (j, name) in rep.joints.iter().zip(["hip", "knee", "ankle"]) {
        let verdict = if j.pass { "within" } else { "outside" };
        println!(
            "{name:>5}: RMSE {:.3} rad vs ISV {:.3} rad, {verdict} natural variability",
            j.rmse, j.isv
        );
    }
    println!(
        "interaction force: RMS {:.2} N, peak {:.2} N",
        rep.force_rms, rep.force_max_abs
    );
    Ok(())
}
