//! From a raw recording to stride ensembles and per-onset identification data.

use std::collections::BTreeMap;

use crate::config::Config;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::gaitproc::events::{detect_events, pair_events, GaitEvent};
use crate::gaitproc::matching::{match_unperturbed, swing_filter, AlignedSwing};
use crate::gaitproc::outliers::{outlier_filter, Partition};
use crate::gaitproc::recording::GaitRecording;
use crate::gaitproc::strides::{segment_strides, Ensemble, Stride};
use crate::gaitproc::transparency::{transparency_metrics, TransparencyReport};
use crate::ident::{WINDOW_AFTER, WINDOW_BEFORE};
use crate::model::{gencoord_from_joint_angles, ExternalForce, JointAngles};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    pub sample_rate: f64,
    pub force_cutoff: f64,
    pub force_order: usize,
    pub grf_threshold: f64,
    /// Minimum duration of a contact state change (s).
    pub debounce: f64,
    pub points: usize,
    /// Data kept before toe-off in identification swings (s).
    pub lead: f64,
    /// Data kept after the analysis window as filter margin (s).
    pub tail: f64,
    pub window: f64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            sample_rate: 128.0,
            force_cutoff: 40.0,
            force_order: 4,
            grf_threshold: 20.0,
            debounce: 0.05,
            points: 500,
            lead: 0.14,
            tail: 0.1,
            window: WINDOW_AFTER,
        }
    }
}

impl PreprocessOptions {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let d = Self::default();
        let o = Self {
            sample_rate: cfg.f64_or("gait.sample_rate", d.sample_rate)?,
            force_cutoff: cfg.f64_or("gait.force_cutoff", d.force_cutoff)?,
            force_order: cfg.usize_or("gait.force_order", d.force_order)?,
            grf_threshold: cfg.f64_or("gait.grf_threshold", d.grf_threshold)?,
            debounce: cfg.f64_or("gait.debounce", d.debounce)?,
            points: cfg.usize_or("gait.points", d.points)?,
            lead: cfg.f64_or("gait.lead", d.lead)?,
            tail: cfg.f64_or("gait.tail", d.tail)?,
            window: cfg.f64_or("gait.window", d.window)?,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.sample_rate, self.force_cutoff, self.window];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.debounce < 0.0 || self.lead < 0.0 || self.tail < 0.0
        {
            return Err(Error::Config("gait options must be positive".into()));
        }
        if self.force_cutoff >= 0.5 * self.sample_rate {
            return Err(Error::Config(
                "gait.force_cutoff must be below the Nyquist frequency".into(),
            ));
        }
        if self.points < 2 || self.force_order == 0 {
            return Err(Error::Config(
                "gait.points >= 2 and gait.force_order >= 1 required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Force-filtered recording on the working grid.
    pub recording: GaitRecording,
    pub events: Vec<GaitEvent>,
    pub strides: Vec<Stride>,
    /// Unperturbed strides that passed the outlier rule (indices into `strides`).
    pub kept: Vec<usize>,
    /// Unperturbed strides rejected as outliers.
    pub discarded: Vec<usize>,
    /// Left hip, knee and ankle of the kept strides.
    pub angles: [Ensemble; 3],
    /// Horizontal interaction force of the kept strides.
    pub force: Ensemble,
}

pub fn preprocess(raw: &GaitRecording, opts: &PreprocessOptions) -> Result<Preprocessed> {
    opts.validate()?;
    let mut rec = raw.clone();
    rec.filter_forces(opts.force_order, opts.force_cutoff)?;
    let rec = rec.resample(opts.sample_rate)?;
    let debounce = (opts.debounce * opts.sample_rate).round() as usize;
    let events = detect_events(&rec.grf, opts.grf_threshold, debounce)?;
    let pairs = pair_events(&events)?;
    let marks: Vec<(usize, f64)> = rec.perturbation_log.iter().map(|e| (e.index, e.amplitude)).collect();
    let strides = segment_strides(&pairs, rec.dt, &marks);
    let unperturbed: Vec<usize> = (0..strides.len()).filter(|&i| !strides[i].is_perturbed()).collect();
    if unperturbed.len() < 4 {
        return Err(Error::NoValidStrides(format!(
            "{} unperturbed strides found, at least 4 needed",
            unperturbed.len()
        )));
    }
    let sel: Vec<Stride> = unperturbed.iter().map(|&i| strides[i]).collect();
    let channel = |f: fn(&JointAngles) -> f64| -> Vec<f64> { rec.left.iter().map(f).collect() };
    let all = [
        Ensemble::from_signal(&channel(|a| a.hip), &sel, opts.points)?,
        Ensemble::from_signal(&channel(|a| a.knee), &sel, opts.points)?,
        Ensemble::from_signal(&channel(|a| a.ankle), &sel, opts.points)?,
    ];
    let Partition { kept, discarded } = outlier_filter(&[&all[0], &all[1], &all[2]])?;
    let fx: Vec<f64> = rec.force.iter().map(|f| f.fx).collect();
    let force = Ensemble::from_signal(&fx, &sel, opts.points)?.select(&kept);
    let angles = all.map(|e| e.select(&kept));
    Ok(Preprocessed {
        events,
        kept: kept.iter().map(|&i| unperturbed[i]).collect(),
        discarded: discarded.iter().map(|&i| unperturbed[i]).collect(),
        strides,
        angles,
        force,
        recording: rec,
    })
}

/// Compares a recording without the device to one in minimal-impedance mode.
pub fn transparency(no_device: &Preprocessed, min_impedance: &Preprocessed) -> Result<TransparencyReport> {
    transparency_metrics(&no_device.angles, &min_impedance.angles, &min_impedance.force.mean())
}

/// Averaged perturbed and matched unperturbed swings for one onset.
#[derive(Debug, Clone)]
pub struct OnsetDataset {
    /// Onset after toe-off (s).
    pub onset: f64,
    pub amplitude: f64,
    /// Perturbed strides used (indices into [`Preprocessed::strides`]).
    pub perturbed: Vec<usize>,
    /// Matched unperturbed stride for each entry of `perturbed`.
    pub matched: Vec<usize>,
    /// Perturbed strides removed by the swing-time or outlier rules.
    pub removed: Vec<usize>,
    /// Averages on a grid where `t = 0` is toe-off.
    pub unperturbed_mean: Trajectory,
    pub perturbed_mean: Trajectory,
}

struct Extract {
    swing: AlignedSwing,
    pelvis: Vec<f64>,
    pelvis_x: Vec<f64>,
    force: Vec<ExternalForce>,
}

fn extract(rec: &GaitRecording, s: &Stride, lead: usize, len: usize) -> Option<Extract> {
    let a = s.toe_off.checked_sub(lead)?;
    let b = a + len;
    (b <= rec.len()).then(|| Extract {
        swing: AlignedSwing {
            dt: rec.dt,
            lead,
            angles: rec.left[a..b].to_vec(),
        },
        pelvis: rec.pelvis_angle[a..b].to_vec(),
        pelvis_x: rec.pelvis_x[a..b].to_vec(),
        force: rec.force[a..b].to_vec(),
    })
}

fn average(items: &[&Extract], t0: f64, dt: f64) -> Result<Trajectory> {
    let n = items[0].pelvis.len();
    let w = 1.0 / items.len() as f64;
    let mean = |f: &dyn Fn(&Extract, usize) -> f64, i: usize| items.iter().map(|e| f(e, i)).sum::<f64>() * w;
    let mut q = Vec::with_capacity(n);
    let mut pelvis = Vec::with_capacity(n);
    let mut force = Vec::with_capacity(n);
    for i in 0..n {
        let ang = JointAngles::new(
            mean(&|e, i| e.swing.angles[i].hip, i),
            mean(&|e, i| e.swing.angles[i].knee, i),
            mean(&|e, i| e.swing.angles[i].ankle, i),
        );
        let p = mean(&|e, i| e.pelvis[i], i);
        q.push(gencoord_from_joint_angles(&ang, p, mean(&|e, i| e.pelvis_x[i], i)));
        pelvis.push(p);
        force.push(ExternalForce::new(
            mean(&|e, i| e.force[i].fx, i),
            mean(&|e, i| e.force[i].fy, i),
        ));
    }
    Trajectory::new(t0, dt, q, pelvis, force)
}

/// Groups perturbed strides by onset, applies the swing-time filter and the
/// outlier rule over the analysis window, matches every perturbed stride to
/// its most similar unperturbed stride and averages both sets.
pub fn onset_datasets(pre: &Preprocessed, opts: &PreprocessOptions) -> Result<Vec<OnsetDataset>> {
    let rec = &pre.recording;
    let dt = rec.dt;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in pre.strides.iter().enumerate() {
        if let Some((onset, _)) = s.perturbation {
            groups.entry((onset / dt).round() as usize).or_default().push(i);
        }
    }
    if groups.is_empty() {
        return Err(Error::NoValidStrides("recording has no perturbed strides".into()));
    }
    let lead = (opts.lead / dt - 1e-9).ceil() as usize;
    let mut out = Vec::new();
    let mut reasons = Vec::new();
    for (onset_idx, members) in groups {
        let onset = onset_idx as f64 * dt;
        let len = lead + ((onset + opts.window + opts.tail) / dt - 1e-9).ceil() as usize + 1;
        let usable = |idx: &[usize]| -> Vec<(usize, Extract)> {
            let strides: Vec<Stride> = idx.iter().map(|&i| pre.strides[i]).collect();
            let ok = swing_filter(&strides, onset, opts.window);
            idx.iter()
                .filter(|&&i| ok.contains(&pre.strides[i]))
                .filter_map(|&i| extract(rec, &pre.strides[i], lead, len).map(|e| (i, e)))
                .collect()
        };
        let mut pert = usable(&members);
        let pool = usable(&pre.kept);
        if pert.is_empty() || pool.is_empty() {
            reasons.push(format!(
                "onset {onset:.4} s: {} perturbed and {} unperturbed strides with swing >= {:.4} s",
                pert.len(),
                pool.len(),
                onset + opts.window
            ));
            continue;
        }
        let mut removed: Vec<usize> = members
            .iter()
            .filter(|i| !pert.iter().any(|(j, _)| j == *i))
            .copied()
            .collect();
        if pert.len() >= 4 {
            let a = lead + ((onset - WINDOW_BEFORE) / dt - 1e-9).ceil().max(0.0) as usize;
            let b = (lead + ((onset + opts.window) / dt + 1e-9).floor() as usize + 1).min(len);
            let ens = |f: fn(&JointAngles) -> f64| {
                Ensemble::new(
                    pert.iter()
                        .map(|(_, e)| e.swing.angles[a..b].iter().map(f).collect())
                        .collect(),
                )
            };
            let (h, k, an) = (ens(|x| x.hip)?, ens(|x| x.knee)?, ens(|x| x.ankle)?);
            let part = outlier_filter(&[&h, &k, &an])?;
            removed.extend(part.discarded.iter().map(|&i| pert[i].0));
            let mut flags = (0..pert.len()).map(|i| part.kept.contains(&i));
            pert.retain(|_| flags.next().unwrap_or(false));
        }
        removed.sort_unstable();
        let swings: Vec<AlignedSwing> = pool.iter().map(|(_, e)| e.swing.clone()).collect();
        let mut matched = Vec::with_capacity(pert.len());
        for (_, e) in &pert {
            matched.push(match_unperturbed(&e.swing, &swings, onset)?);
        }
        let t0 = -(lead as f64) * dt;
        let p_items: Vec<&Extract> = pert.iter().map(|(_, e)| e).collect();
        let u_items: Vec<&Extract> = matched.iter().map(|&m| &pool[m].1).collect();
        out.push(OnsetDataset {
            onset,
            amplitude: pre.strides[pert[0].0].perturbation.map_or(0.0, |p| p.1),
            perturbed: pert.iter().map(|(i, _)| *i).collect(),
            matched: matched.iter().map(|&m| pool[m].0).collect(),
            removed,
            unperturbed_mean: average(&u_items, t0, dt)?,
            perturbed_mean: average(&p_items, t0, dt)?,
        });
    }
    if out.is_empty() {
        return Err(Error::NoValidStrides(reasons.join("; ")));
    }
    Ok(out)
}
