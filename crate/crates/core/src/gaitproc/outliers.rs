//! Interquartile-range stride outlier rule.

use crate::error::{Error, Result};
use crate::gaitproc::strides::Ensemble;

/// Fraction of points a stride may have outside the fences before it is discarded.
pub const MAX_OUTSIDE_FRACTION: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub kept: Vec<usize>,
    pub discarded: Vec<usize>,
}

/// Flags strides with more than 20 % of their points outside
/// `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, quartiles taken across strides at each
/// point in a single pass.
pub fn outlier_flags(ensemble: &Ensemble) -> Result<Vec<bool>> {
    if ensemble.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "outlier detection needs at least 4 strides, got {}",
            ensemble.len()
        )));
    }
    let (q1, q3) = ensemble.quartiles();
    let points = ensemble.points();
    Ok(ensemble
        .strides
        .iter()
        .map(|s| {
            let outside = s
                .iter()
                .enumerate()
                .filter(|(k, v)| {
                    let iqr = q3[*k] - q1[*k];
                    **v < q1[*k] - 1.5 * iqr || **v > q3[*k] + 1.5 * iqr
                })
                .count();
            outside as f64 > MAX_OUTSIDE_FRACTION * points as f64
        })
        .collect())
}

/// Discards a stride when any of the channels flags it.
pub fn outlier_filter(channels: &[&Ensemble]) -> Result<Partition> {
    let n = channels.first().map_or(0, |e| e.len());
    if channels.iter().any(|e| e.len() != n) {
        return Err(Error::InvalidInput("channels hold different stride counts".into()));
    }
    let mut flag = vec![false; n];
    for e in channels {
        for (f, o) in flag.iter_mut().zip(outlier_flags(e)?) {
            *f |= o;
        }
    }
    let (kept, discarded): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| !flag[i]);
    Ok(Partition { kept, discarded })
}
