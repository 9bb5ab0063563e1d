//! Pairing perturbed strides with unperturbed ones and the swing-time filter.

use crate::error::{Error, Result};
use crate::gaitproc::strides::Stride;
use crate::model::JointAngles;

/// Length of the matching window before the onset (s).
pub const MATCH_WINDOW: f64 = 0.025;

/// Joint angles of a stride aligned at toe-off: sample `k` is `k * dt` after toe-off.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSwing {
    pub dt: f64,
    /// Samples before toe-off included at the front.
    pub lead: usize,
    pub angles: Vec<JointAngles>,
}

impl AlignedSwing {
    fn window(&self, onset: f64) -> Option<std::ops::RangeInclusive<usize>> {
        let eps = 1e-6;
        let a = ((onset - MATCH_WINDOW) / self.dt - eps).ceil() as i64 + self.lead as i64;
        let b = (onset / self.dt + eps).floor() as i64 + self.lead as i64;
        (a >= 0 && b >= a && (b as usize) < self.angles.len()).then_some(a as usize..=b as usize)
    }
}

/// Index into `pool` of the swing with the smallest joint-angle RMSE to
/// `perturbed` over `[onset - 25 ms, onset]`; ties go to the earliest.
pub fn match_unperturbed(perturbed: &AlignedSwing, pool: &[AlignedSwing], onset: f64) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::NoValidStrides("no unperturbed strides to match against".into()));
    }
    let wp = perturbed.window(onset).ok_or_else(|| {
        Error::InvalidInput(format!(
            "onset {onset} s leaves no matching window in the perturbed stride"
        ))
    })?;
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in pool.iter().enumerate() {
        let Some(wc) = cand.window(onset) else { continue };
        if wc.clone().count() != wp.clone().count() {
            continue;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for (a, b) in perturbed.angles[wp.clone()].iter().zip(&cand.angles[wc]) {
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                sum += (x - y).powi(2);
                n += 1;
            }
        }
        let rmse = (sum / n as f64).sqrt();
        if best.is_none_or(|(_, r)| rmse < r) {
            best = Some((i, rmse));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::NoValidStrides("no unperturbed stride covers the matching window".into()))
}

/// Keeps strides whose swing lasts at least `onset + window`.
pub fn swing_filter(strides: &[Stride], onset: f64, window: f64) -> Vec<Stride> {
    let need = onset + window - 1e-9;
    strides.iter().filter(|s| s.swing_duration() >= need).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swing(offset: f64, slope: f64) -> AlignedSwing {
        AlignedSwing {
            dt: 0.005,
            lead: 4,
            angles: (0..80)
                .map(|k| {
                    let v = offset + slope * k as f64;
                    JointAngles::new(v, -v, 0.5 * v)
                })
                .collect(),
        }
    }

    #[test]
    fn exact_copy_wins() {
        let p = swing(0.1, 0.01);
        let pool = vec![swing(0.2, 0.01), swing(0.1, 0.01), swing(0.1, 0.02)];
        assert_eq!(match_unperturbed(&p, &pool, 0.2).unwrap(), 1);
    }

    #[test]
    fn single_candidate_and_empty_pool() {
        let p = swing(0.1, 0.01);
        assert_eq!(match_unperturbed(&p, &[swing(5.0, 0.0)], 0.2).unwrap(), 0);
        assert!(match_unperturbed(&p, &[], 0.2).is_err());
    }

    #[test]
    fn known_ranking_and_ties() {
        let p = swing(0.0, 0.0);
        let pool = vec![swing(0.3, 0.0), swing(-0.1, 0.0), swing(0.1, 0.0), swing(0.2, 0.0)];
        assert_eq!(match_unperturbed(&p, &pool, 0.1).unwrap(), 1);
    }

    #[test]
    fn shift_invariance() {
        let p = swing(0.0, 0.01);
        let pool = vec![swing(0.05, 0.011), swing(-0.02, 0.01), swing(0.0, 0.013)];
        let base = match_unperturbed(&p, &pool, 0.15).unwrap();
        let shift = |s: &AlignedSwing| AlignedSwing {
            angles: s
                .angles
                .iter()
                .map(|a| JointAngles::new(a.hip + 3.0, a.knee + 3.0, a.ankle + 3.0))
                .collect(),
            ..s.clone()
        };
        let pool2: Vec<_> = pool.iter().map(shift).collect();
        assert_eq!(match_unperturbed(&shift(&p), &pool2, 0.15).unwrap(), base);
    }

    #[test]
    fn swing_time_threshold() {
        let mk = |swing: f64| Stride {
            start: 0,
            toe_off: 100,
            end: 100 + (swing * 1000.0).round() as usize,
            dt: 0.001,
            perturbation: None,
        };
        assert_eq!(swing_filter(&[mk(0.560)], 0.300, 0.250).len(), 1);
        assert_eq!(swing_filter(&[mk(0.549)], 0.300, 0.250).len(), 0);
        assert_eq!(swing_filter(&[mk(0.40), mk(0.62)], 0.050, 0.250).len(), 2);
    }
}
