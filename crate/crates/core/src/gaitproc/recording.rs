//! Columnar gait recordings.
//!
//! A recording is comma-separated text with one header row. Header names may
//! carry a unit annotation in brackets (`hip_l [rad]`), lines starting with
//! `#` are comments, and columns may appear in any order:
//!
//! | column | unit | content |
//! |---|---|---|
//! | `time` | s | uniform sample times |
//! | `grf_vertical` | N | vertical ground reaction force under the left foot |
//! | `hip_l`, `knee_l`, `ankle_l` | rad | left joint angles |
//! | `hip_r`, `knee_r`, `ankle_r` | rad | right joint angles |
//! | `pelvis_angle` | rad | pelvis angle in the sagittal plane |
//! | `force_x`, `force_y` | N | interaction force on the thigh cuff |
//! | `perturbation` | N | commanded perturbation force, zero outside pulses |
//! | `pelvis_x` (optional) | m | horizontal pelvis position |

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ExternalForce, JointAngles};
use crate::signal::{LinearInterp, Sos, UniformSpline};
use crate::table::parse_table;

pub const COLUMNS: [&str; 12] = [
    "time",
    "grf_vertical",
    "hip_l",
    "knee_l",
    "ankle_l",
    "hip_r",
    "knee_r",
    "ankle_r",
    "pelvis_angle",
    "force_x",
    "force_y",
    "perturbation",
];

const UNITS: [&str; 13] = [
    "s", "N", "rad", "rad", "rad", "rad", "rad", "rad", "rad", "N", "N", "N", "m",
];

/// Rising edge of the perturbation channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationEvent {
    pub index: usize,
    pub time: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitRecording {
    pub t0: f64,
    pub dt: f64,
    pub grf: Vec<f64>,
    pub left: Vec<JointAngles>,
    pub right: Vec<JointAngles>,
    pub pelvis_angle: Vec<f64>,
    pub pelvis_x: Vec<f64>,
    pub force: Vec<ExternalForce>,
    pub perturbation: Vec<f64>,
    pub perturbation_log: Vec<PerturbationEvent>,
}

fn perturbation_log(t0: f64, dt: f64, p: &[f64]) -> Vec<PerturbationEvent> {
    (0..p.len())
        .filter(|&i| p[i] != 0.0 && (i == 0 || p[i - 1] == 0.0))
        .map(|i| PerturbationEvent {
            index: i,
            time: t0 + dt * i as f64,
            amplitude: p[i],
        })
        .collect()
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<GaitRecording> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_recording(&text, path)
}

pub fn parse_recording(text: &str, origin: impl AsRef<Path>) -> Result<GaitRecording> {
    let table = parse_table(text, origin)?;
    let cols: Vec<&[f64]> = COLUMNS.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let (t0, dt) = table.uniform_time(4)?;
    let n = table.len();
    let angles = |a: usize| -> Vec<JointAngles> {
        (0..n)
            .map(|i| JointAngles::new(cols[a][i], cols[a + 1][i], cols[a + 2][i]))
            .collect()
    };
    Ok(GaitRecording {
        t0,
        dt,
        grf: cols[1].to_vec(),
        left: angles(2),
        right: angles(5),
        pelvis_angle: cols[8].to_vec(),
        force: (0..n).map(|i| ExternalForce::new(cols[9][i], cols[10][i])).collect(),
        perturbation_log: perturbation_log(t0, dt, cols[11]),
        perturbation: cols[11].to_vec(),
        pelvis_x: table.optional("pelvis_x").map_or_else(|| vec![0.0; n], <[f64]>::to_vec),
    })
}

impl GaitRecording {
    pub fn len(&self) -> usize {
        self.grf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grf.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Zero-phase low-pass filtering of the interaction force channels.
    pub fn filter_forces(&mut self, order: usize, cutoff: f64) -> Result<()> {
        let sos = Sos::butter_lowpass(order, cutoff, self.sample_rate())?;
        let fx = sos.filtfilt(&self.force.iter().map(|f| f.fx).collect::<Vec<_>>())?;
        let fy = sos.filtfilt(&self.force.iter().map(|f| f.fy).collect::<Vec<_>>())?;
        self.force = fx.into_iter().zip(fy).map(|(x, y)| ExternalForce::new(x, y)).collect();
        Ok(())
    }

    /// Copy on a uniform grid at `fs`, covering the original time span.
    /// Kinematics and forces use cubic splines, the ground reaction force
    /// linear interpolation and the perturbation channel a sample-and-hold.
    pub fn resample(&self, fs: f64) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if (fs * self.dt - 1.0).abs() < 1e-9 {
            return Ok(self.clone());
        }
        let dt = 1.0 / fs;
        let span = self.dt * (self.len() - 1) as f64;
        let n = (span / dt + 1e-9).floor() as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| self.t0 + dt * i as f64).collect();
        let spline = |y: Vec<f64>| -> Result<Vec<f64>> {
            let s = UniformSpline::new(self.t0, self.dt, &y)?;
            Ok(times.iter().map(|&t| s.eval(t)).collect())
        };
        let angles = |a: &[JointAngles]| -> Result<Vec<JointAngles>> {
            let h = spline(a.iter().map(|j| j.hip).collect())?;
            let k = spline(a.iter().map(|j| j.knee).collect())?;
            let an = spline(a.iter().map(|j| j.ankle).collect())?;
            Ok((0..n).map(|i| JointAngles::new(h[i], k[i], an[i])).collect())
        };
        let grf = LinearInterp::new(self.t0, self.dt, &self.grf)?;
        let fx = spline(self.force.iter().map(|f| f.fx).collect())?;
        let fy = spline(self.force.iter().map(|f| f.fy).collect())?;
        let hold = |t: f64| {
            let i = ((t - self.t0) / self.dt + 1e-9).floor() as usize;
            self.perturbation[i.min(self.len() - 1)]
        };
        // an edge lands on the first new sample at or after it
        let perturbation: Vec<f64> = times.iter().map(|&t| hold(t)).collect();
        Ok(Self {
            t0: self.t0,
            dt,
            grf: times.iter().map(|&t| grf.eval(t)).collect(),
            left: angles(&self.left)?,
            right: angles(&self.right)?,
            pelvis_angle: spline(self.pelvis_angle.clone())?,
            pelvis_x: spline(self.pelvis_x.clone())?,
            force: fx.into_iter().zip(fy).map(|(x, y)| ExternalForce::new(x, y)).collect(),
            perturbation_log: perturbation_log(self.t0, dt, &perturbation),
            perturbation,
        })
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = COLUMNS
            .iter()
            .chain(std::iter::once(&"pelvis_x"))
            .zip(UNITS)
            .map(|(c, u)| format!("{c} [{u}]"))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let (l, r, f) = (self.left[i], self.right[i], self.force[i]);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.time(i),
                self.grf[i],
                l.hip,
                l.knee,
                l.ankle,
                r.hip,
                r.knee,
                r.ankle,
                self.pelvis_angle[i],
                f.fx,
                f.fy,
                self.perturbation[i],
                self.pelvis_x[i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "time [s],grf_vertical [N],hip_l,knee_l,ankle_l,hip_r,knee_r,ankle_r,pelvis_angle,force_x,force_y,perturbation";

    fn body(n: usize) -> String {
        (0..n)
            .map(|i| {
                let p = if i == 3 || i == 4 { 40.0 } else { 0.0 };
                format!("{},600,0.1,-0.2,0.05,0,0,0,0.01,1,2,{p}\n", i as f64 * 0.01)
            })
            .collect()
    }

    #[test]
    fn parses_and_logs_perturbations() {
        let text = format!("# sample\n{HEADER}\n{}", body(8));
        let r = parse_recording(&text, "x.csv").unwrap();
        assert_eq!(r.len(), 8);
        assert!((r.dt - 0.01).abs() < 1e-12);
        assert_eq!(r.left[2].knee, -0.2);
        assert_eq!(r.perturbation_log.len(), 1);
        assert_eq!(r.perturbation_log[0].index, 3);
        assert_eq!(r.pelvis_x, vec![0.0; 8]);
    }

    #[test]
    fn missing_column_is_named() {
        let text = HEADER.replace("grf_vertical [N],", "") + "\n";
        match parse_recording(&text, "x.csv") {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "grf_vertical"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(parse_recording("", "x.csv"), Err(Error::Parse { .. })));
    }

    #[test]
    fn bad_value_reports_line() {
        let mut text = format!("{HEADER}\n{}", body(6));
        text = text.replacen("600", "abc", 3);
        match parse_recording(&text, "x.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resampling_keeps_onset_and_span() {
        let text = format!("{HEADER}\n{}", body(11));
        let r = parse_recording(&text, "x.csv").unwrap();
        let s = r.resample(250.0).unwrap();
        assert_eq!(s.len(), 26);
        assert_eq!(s.perturbation_log.len(), 1);
        assert!((s.perturbation_log[0].time - 0.032).abs() < 1e-12);
        assert!((s.left[7].hip - 0.1).abs() < 1e-12);
    }
}
