//! Identifies joint stiffness and damping from a perturbed and an
//! unperturbed swing stored as trajectory files.
//!
//! ```text
//! cargo run --release --example identify_swing -- [unperturbed.csv perturbed.csv onset]
//! ```

use std::path::PathBuf;

use swing_impedance::dynamics::read_trajectory;
use swing_impedance::ident::{identify, IdentOptions, IdentProblem};
use swing_impedance::model::BodyModel;

fn main() -> swing_impedance::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (u, p, onset) = match args.as_slice() {
        [u, p, o] => (u.into(), p.into(), o.parse().expect("onset in seconds")),
        _ => (
            data.join("synthetic_unperturbed.csv"),
            data.join("synthetic_perturbed.csv"),
            0.175,
        ),
    };
    let opts = IdentOptions::default();
    let problem = IdentProblem::new(
        BodyModel::reference_adult(),
        read_trajectory(&u)?,
        read_trajectory(&p)?,
        onset,
        opts.inverse,
    )?;
    let r = identify(&problem, &opts)?;
    for (j, name) in ["hip", "knee", "ankle"].iter().enumerate() {
        println!(
            "{name:>5}: K = {:8.3} N*m/rad  D = {:7.4} N*m*s/rad  VAF = {:.3} %",
            r.params.k[j], r.params.d[j], r.vaf[j]
        );
    }
    let converged = r.restarts.iter().filter(|s| s.converged).count();
    println!(
        "{converged}/{} restarts converged, best #{}",
        r.restarts.len(),
        r.best_index
    );
    Ok(())
}
