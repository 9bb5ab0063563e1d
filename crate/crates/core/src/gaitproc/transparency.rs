//! Joint-angle RMSE between conditions against intra-subject variability.

use crate::error::{Error, Result};
use crate::gaitproc::strides::Ensemble;
use crate::signal::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTransparency {
    /// RMSE between the stride-averaged angles of the two conditions (rad).
    pub rmse: f64,
    /// Twice the mean across-stride standard deviation without the device (rad).
    pub isv: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransparencyReport {
    /// Hip, knee, ankle.
    pub joints: [JointTransparency; 3],
    /// RMS of the stride-averaged interaction force (N).
    pub force_rms: f64,
    /// Largest absolute stride-averaged interaction force (N).
    pub force_max_abs: f64,
}

/// Compares walking without the device to walking in minimal-impedance mode
/// for one participant. `force` is the stride-averaged interaction force.
pub fn transparency_metrics(
    no_device: &[Ensemble; 3],
    min_impedance: &[Ensemble; 3],
    force: &[f64],
) -> Result<TransparencyReport> {
    let joints = std::array::from_fn(|j| {
        let (a, b) = (&no_device[j], &min_impedance[j]);
        if a.is_empty() || b.is_empty() || a.points() != b.points() {
            return Err(Error::InvalidInput(
                "transparency needs nonempty ensembles of equal normalized length".into(),
            ));
        }
        let rmse = stats::rmse(&a.mean(), &b.mean());
        let isv = 2.0 * stats::mean(&a.std());
        Ok(JointTransparency {
            rmse,
            isv,
            pass: rmse < isv,
        })
    });
    let [h, k, a] = joints;
    if force.is_empty() {
        return Err(Error::InvalidInput("no interaction force samples".into()));
    }
    Ok(TransparencyReport {
        joints: [h?, k?, a?],
        force_rms: stats::rms(force),
        force_max_abs: stats::max_abs(force),
    })
}

/// `ISV_ave = (2 / n_p) Σ σ_p` from each participant's mean across-stride
/// standard deviation `σ_p`.
pub fn isv_ave(sigma: &[f64]) -> f64 {
    2.0 * stats::mean(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(offset: f64, spread: f64) -> Ensemble {
        Ensemble::new(
            (0..6)
                .map(|i| {
                    let s = if i % 2 == 0 { spread } else { -spread };
                    (0..50).map(|k| (k as f64 * 0.1).sin() + offset + s).collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_comparison_passes() {
        let e = [ens(0.0, 0.02), ens(0.0, 0.02), ens(0.0, 0.02)];
        let r = transparency_metrics(&e, &e, &[1.0, -1.0]).unwrap();
        for j in r.joints {
            assert_eq!(j.rmse, 0.0);
            assert!(j.pass);
        }
        assert_eq!(r.force_rms, 1.0);
    }

    #[test]
    fn offset_against_spread() {
        let nd = [ens(0.0, 0.01), ens(0.0, 0.01), ens(0.0, 0.01)];
        let mi = [ens(0.03, 0.01), ens(0.005, 0.01), ens(0.0, 0.01)];
        let r = transparency_metrics(&nd, &mi, &[2.0]).unwrap();
        let isv = 2.0 * 0.01 * (6.0f64 / 5.0).sqrt();
        assert!((r.joints[0].isv - isv).abs() < 1e-12);
        assert!((r.joints[0].rmse - 0.03).abs() < 1e-12);
        assert!(!r.joints[0].pass);
        assert!(r.joints[1].pass);
    }

    #[test]
    fn isv_average() {
        assert!((isv_ave(&[0.02, 0.03]) - 0.05).abs() < 1e-15);
    }
}
