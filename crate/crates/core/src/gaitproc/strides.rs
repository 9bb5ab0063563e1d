//! Stride segmentation and time-normalized ensembles.

use crate::error::{Error, Result};
use crate::gaitproc::events::StridePair;
use crate::signal::{spline::resample, stats};

/// One gait cycle from heel strike to the next heel strike (sample indices
/// into the recording; `end` is the next heel strike).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stride {
    pub start: usize,
    pub toe_off: usize,
    pub end: usize,
    pub dt: f64,
    /// Perturbation onset after toe-off (s) and commanded amplitude (N).
    pub perturbation: Option<(f64, f64)>,
}

impl Stride {
    pub fn swing_duration(&self) -> f64 {
        (self.end - self.toe_off) as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.end - self.start) as f64 * self.dt
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbation.is_some()
    }
}

/// Strides between consecutive heel strikes. Onsets in `perturbations`
/// (sample index, amplitude) that fall in a stride's swing mark it perturbed.
pub fn segment_strides(pairs: &[StridePair], dt: f64, perturbations: &[(usize, f64)]) -> Vec<Stride> {
    pairs
        .windows(2)
        .filter(|w| w[0].toe_off > w[0].heel_strike && w[0].toe_off < w[1].heel_strike)
        .map(|w| {
            let (start, toe_off, end) = (w[0].heel_strike, w[0].toe_off, w[1].heel_strike);
            let perturbation = perturbations
                .iter()
                .find(|(i, _)| *i >= toe_off && *i < end)
                .map(|(i, a)| ((i - toe_off) as f64 * dt, *a));
            Stride {
                start,
                toe_off,
                end,
                dt,
                perturbation,
            }
        })
        .collect()
}

/// Strides of one channel resampled to a common number of points
/// (0 to 100 % of the gait cycle).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub strides: Vec<Vec<f64>>,
}

impl Ensemble {
    /// Cuts `signal` at each stride (both heel strikes included) and resamples
    /// every stride to `points` samples with a cubic spline.
    pub fn from_signal(signal: &[f64], strides: &[Stride], points: usize) -> Result<Self> {
        let data = strides
            .iter()
            .map(|s| {
                if s.end >= signal.len() {
                    return Err(Error::InvalidInput("stride runs past the end of the signal".into()));
                }
                resample(&signal[s.start..=s.end], points)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(data)
    }

    pub fn new(strides: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = strides.first() {
            if strides.iter().any(|s| s.len() != first.len()) {
                return Err(Error::InvalidInput("ensemble strides differ in length".into()));
            }
        }
        Ok(Self { strides })
    }

    pub fn len(&self) -> usize {
        self.strides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strides.is_empty()
    }

    pub fn points(&self) -> usize {
        self.strides.first().map_or(0, Vec::len)
    }

    fn column(&self, k: usize) -> Vec<f64> {
        self.strides.iter().map(|s| s[k]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.points()).map(|k| stats::mean(&self.column(k))).collect()
    }

    /// Across-stride sample standard deviation at each point.
    pub fn std(&self) -> Vec<f64> {
        (0..self.points()).map(|k| stats::std(&self.column(k))).collect()
    }

    /// First and third quartile at each point.
    pub fn quartiles(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.points())
            .map(|k| {
                let mut c = self.column(k);
                c.sort_by(f64::total_cmp);
                (stats::quantile_sorted(&c, 0.25), stats::quantile_sorted(&c, 0.75))
            })
            .unzip()
    }

    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            strides: keep.iter().map(|&i| self.strides[i].clone()).collect(),
        }
    }

    /// Restricts every stride to points `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            strides: self.strides.iter().map(|s| s[range.clone()].to_vec()).collect(),
        }
    }
}
