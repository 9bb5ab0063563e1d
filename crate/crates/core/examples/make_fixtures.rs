//! Regenerates the data files shipped in `data/`.
//!
//! ```text
//! cargo run --release --example make_fixtures -- [data-dir]
//! ```
//!
//! * `swing_template.csv`: feed-forward forces of the analytic reference swing.
//! * `synthetic_{unperturbed,perturbed}.csv`: one simulated experiment with
//!   known impedance, as identification input.
//! * `gait_perturbed.csv`: a walking recording whose left swings come from
//!   the simulator, with pulses at 50, 175 and 300 ms after toe-off.
//! * `gait_no_device.csv`, `gait_device.csv`: walking without the device and
//!   in minimal-impedance mode, built so the transparency metrics come out at
//!   chosen values.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use swing_impedance::dynamics::{ImpedanceParams, Trajectory};
use swing_impedance::gaitproc::{preprocess, read_recording, transparency, GaitRecording, PreprocessOptions};
use swing_impedance::model::{BodyModel, ExternalForce, JointAngles};
use swing_impedance::synthval::{simulate_swings, write_template, Scenario};

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

const FS: f64 = 128.0;

/// Impedance used for the simulated swings.
fn truth() -> ImpedanceParams {
    ImpedanceParams::new([50.0, 5.0, 15.0], [3.0, 0.1, 1.0])
}

fn main() -> AnyResult<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    std::fs::create_dir_all(&dir)?;
    let model = BodyModel::reference_adult();

    let sc = Scenario::analytic(&model);
    let path = dir.join("swing_template.csv");
    write_template(&sc.template, BufWriter::new(File::create(&path)?))?;
    println!("wrote {} ({} rows)", path.display(), sc.template.u.len());

    synthetic_pair(&dir, &model)?;
    perturbed_walk(&dir, &model)?;
    transparency_pair(&dir)?;
    Ok(())
}

fn synthetic_pair(dir: &Path, model: &BodyModel) -> AnyResult<()> {
    let sc = Scenario::builtin()?;
    let p = truth();
    let sw = simulate_swings(model, &p, &sc)?;
    for (name, tr) in [("unperturbed", &sw.unperturbed), ("perturbed", &sw.perturbed)] {
        let path = dir.join(format!("synthetic_{name}.csv"));
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(
            w,
            "# simulated swing, K = {:?} N*m/rad, D = {:?} N*m*s/rad, {} N pulse at {} s for {} s",
            p.k, p.d, sc.pulse_amplitude, sc.onset, sc.pulse_width
        )?;
        tr.write(&mut w)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Channels of a recording under construction; `None` marks samples still
/// to be filled.
struct Builder {
    hip: Vec<Option<f64>>,
    knee: Vec<Option<f64>>,
    ankle: Vec<Option<f64>>,
    pelvis: Vec<Option<f64>>,
    pelvis_x: Vec<Option<f64>>,
    fx: Vec<Option<f64>>,
    fy: Vec<Option<f64>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            hip: vec![None; n],
            knee: vec![None; n],
            ankle: vec![None; n],
            pelvis: vec![None; n],
            pelvis_x: vec![None; n],
            fx: vec![None; n],
            fy: vec![None; n],
        }
    }

    fn channels(&mut self) -> [&mut Vec<Option<f64>>; 7] {
        [
            &mut self.hip,
            &mut self.knee,
            &mut self.ankle,
            &mut self.pelvis,
            &mut self.pelvis_x,
            &mut self.fx,
            &mut self.fy,
        ]
    }

    /// Copies samples `0..len` of a simulated swing to positions starting at `at`.
    fn put_swing(&mut self, tr: &Trajectory, at: usize, len: usize) {
        let ang = tr.joint_angles();
        for i in 0..len {
            let v = [
                ang[i].hip,
                ang[i].knee,
                ang[i].ankle,
                tr.pelvis_angle[i],
                tr.q[i].pelvis,
                tr.force[i].fx,
                tr.force[i].fy,
            ];
            for (c, x) in self.channels().into_iter().zip(v) {
                c[at + i] = Some(x);
            }
        }
    }

    /// Fills every gap with a cubic Hermite segment matching the values and
    /// slopes of the samples on either side.
    fn fill(self) -> [Vec<f64>; 7] {
        let mut b = self;
        b.channels().map(|c| {
            let n = c.len();
            let mut i = 0;
            while i < n {
                if c[i].is_some() {
                    i += 1;
                    continue;
                }
                let mut e = i;
                while e < n && c[e].is_none() {
                    e += 1;
                }
                // unbounded ends are cropped away later
                if i < 2 || e + 1 >= n {
                    let edge = if i < 2 { c[e] } else { c[i - 1] };
                    c[i..e].fill(edge);
                    i = e;
                    continue;
                }
                let a = i - 1;
                let (ya, yb) = (c[a].unwrap(), c[e].unwrap());
                let ma = ya - c[a - 1].unwrap();
                let mb = c[e + 1].unwrap() - yb;
                let h = (e - a) as f64;
                for (j, slot) in c.iter_mut().enumerate().take(e).skip(a + 1) {
                    let s = (j - a) as f64 / h;
                    let (s2, s3) = (s * s, s * s * s);
                    *slot = Some(
                        (2.0 * s3 - 3.0 * s2 + 1.0) * ya
                            + (s3 - 2.0 * s2 + s) * h * ma
                            + (-2.0 * s3 + 3.0 * s2) * yb
                            + (s3 - s2) * h * mb,
                    );
                }
                i = e;
            }
            c.iter().map(|v| v.unwrap()).collect()
        })
    }
}

fn recording(ch: [Vec<f64>; 7], grf: Vec<f64>, perturbation: Vec<f64>, right_shift: usize) -> GaitRecording {
    let [hip, knee, ankle, pelvis, pelvis_x, fx, fy] = ch;
    let n = hip.len();
    let left: Vec<JointAngles> = (0..n).map(|i| JointAngles::new(hip[i], knee[i], ankle[i])).collect();
    let right = (0..n).map(|i| left[(i + right_shift).min(n - 1)]).collect();
    GaitRecording {
        t0: 0.0,
        dt: 1.0 / FS,
        grf,
        left,
        right,
        pelvis_angle: pelvis,
        pelvis_x,
        force: fx.into_iter().zip(fy).map(|(x, y)| ExternalForce::new(x, y)).collect(),
        perturbation,
        perturbation_log: Vec::new(),
    }
}

fn save(dir: &Path, name: &str, comment: &str, rec: &GaitRecording) -> AnyResult<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "# {comment}")?;
    rec.write(&mut w)?;
    w.flush()?;
    println!("wrote {} ({} samples)", path.display(), rec.len());
    Ok(path)
}

/// Treadmill walk with 40 strides of 214 samples (toe-off after 128), the
/// swing of every stride taken from the simulator and every few strides
/// perturbed at one of three onsets.
fn perturbed_walk(dir: &Path, model: &BodyModel) -> AnyResult<()> {
    const STRIDE: usize = 214;
    const STANCE: usize = 128;
    const STRIDES: usize = 40;
    let base = Scenario::builtin()?;
    let lead = (-base.t_start * FS).round() as usize;
    let swing = STRIDE - STANCE + lead;
    let onsets = [0.05, 0.175, 0.3];
    let sims = onsets
        .iter()
        .map(|&onset| simulate_swings(model, &truth(), &Scenario { onset, ..base.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let perturbed: Vec<(usize, usize)> = [3, 7, 12, 15, 19, 24, 27, 31, 36]
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i % 3))
        .collect();

    // strides -1 and STRIDES are built too so every gap has neighbours
    let hs = |s: usize| s * STRIDE + STRIDE - lead + 1;
    let total = hs(STRIDES + 1) + STRIDE;
    let mut b = Builder::new(total);
    let mut pert = vec![0.0; total];
    for s in 0..STRIDES + 2 {
        let stride = s.wrapping_sub(1);
        let to = hs(s) - STRIDE + STANCE;
        let at = to - lead;
        match perturbed.iter().find(|(p, _)| *p == stride) {
            Some(&(_, k)) => {
                b.put_swing(&sims[k].perturbed, at, swing);
                let sc = Scenario {
                    onset: onsets[k],
                    ..base.clone()
                };
                for i in 0..swing {
                    pert[at + i] = sc.pulse_sample(i);
                }
            }
            None => b.put_swing(&sims[0].unperturbed, at, swing),
        }
    }
    let ch = b.fill();
    let first = hs(0) - STRIDE + STANCE - lead;
    let last = hs(STRIDES) + 40;
    let grf: Vec<f64> = (0..total)
        .map(|i| {
            let p = (i + STRIDE - hs(0) % STRIDE) % STRIDE;
            if p < STANCE {
                700.0
            } else {
                0.0
            }
        })
        .collect();
    let crop = |v: &[f64]| v[first..last].to_vec();
    let rec = recording(ch.map(|c| crop(&c)), crop(&grf), crop(&pert), STRIDE / 2);
    let p = truth();
    save(
        dir,
        "gait_perturbed.csv",
        &format!(
            "synthetic walk, left swings simulated with K = {:?} N*m/rad, D = {:?} N*m*s/rad",
            p.k, p.d
        ),
        &rec,
    )?;
    Ok(())
}

/// Transparency targets: RMSE between conditions and twice the mean
/// across-stride standard deviation without the device, per joint (rad),
/// and the interaction force RMS and peak (N).
const RMSE: [f64; 3] = [0.030, 0.052, 0.026];
const ISV: [f64; 3] = [0.047, 0.086, 0.048];
const FORCE_RMS: f64 = 2.00;
const FORCE_MAX: f64 = 4.63;

/// Mean gait-cycle angles (rad), periodic in `phase`.
fn base_angles(phase: f64) -> [f64; 3] {
    let w = 2.0 * PI * phase;
    [
        0.15 + 0.35 * (w - 0.3).cos(),
        0.45 - 0.25 * (w - 0.5).cos() - 0.2 * (2.0 * w - 2.6).cos(),
        0.05 * (w + 0.8).sin() - 0.12 * (2.0 * w - 1.1).cos(),
    ]
}

fn force_shape(phase: f64, width: f64) -> f64 {
    (2.0 * PI * phase).sin() * (-((phase - 0.62) / width).powi(2)).exp()
}

fn rms_and_max(f: impl Fn(f64) -> f64, points: usize) -> (f64, f64) {
    let v: Vec<f64> = (0..points).map(|i| f(i as f64 / (points - 1) as f64)).collect();
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / points as f64).sqrt();
    (rms, v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

fn transparency_pair(dir: &Path) -> AnyResult<()> {
    const STRIDE: usize = 154;
    const STANCE: usize = 92;
    const STRIDES: usize = 20;
    const BEFORE: usize = 30;
    let points = PreprocessOptions::default().points;

    // width of the force bump giving the target peak-to-RMS ratio
    let ratio = |w: f64| {
        let (r, m) = rms_and_max(|p| force_shape(p, w), points);
        m / r
    };
    let (mut lo, mut hi) = (0.02, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > FORCE_MAX / FORCE_RMS {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let width = 0.5 * (lo + hi);
    let mut force_gain = FORCE_RMS / rms_and_max(|p| force_shape(p, width), points).0;

    // per-point spread: ±a sin²(πφ) alternating over an even number of strides
    let mean_sin2 = (0..points)
        .map(|i| (PI * i as f64 / (points - 1) as f64).sin().powi(2))
        .sum::<f64>()
        / points as f64;
    let n = STRIDES as f64;
    let spread = ISV.map(|isv| isv / (2.0 * mean_sin2 * (n / (n - 1.0)).sqrt()));

    let build = |offset: [f64; 3], gain: f64| -> GaitRecording {
        // the tail reaches past the last toe-off so the final stride is complete
        let total = BEFORE + STRIDE * STRIDES + STANCE + 10;
        let mut ch: [Vec<f64>; 7] = Default::default();
        let mut grf = Vec::with_capacity(total);
        for i in 0..total {
            let k = i as isize - BEFORE as isize;
            let s = k.div_euclid(STRIDE as isize);
            let pos = k.rem_euclid(STRIDE as isize) as usize;
            let phase = pos as f64 / STRIDE as f64;
            let sign = if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let bump = (PI * phase).sin().powi(2);
            let g = base_angles(phase);
            for j in 0..3 {
                ch[j].push(g[j] + offset[j] + sign * spread[j] * bump);
            }
            ch[3].push(0.03 * (2.0 * PI * phase).sin());
            ch[4].push(0.0);
            ch[5].push(gain * force_shape(phase, width));
            ch[6].push(0.0);
            grf.push(if pos < STANCE { 700.0 } else { 0.0 });
        }
        recording(ch, grf, vec![0.0; total], STRIDE / 2)
    };

    let nd = build([0.0; 3], 0.0);
    let nd_path = save(dir, "gait_no_device.csv", "synthetic walk without the device", &nd)?;
    let opts = PreprocessOptions::default();
    let nd_pre = preprocess(&read_recording(&nd_path)?, &opts)?;
    // the force low-pass barely touches the smooth bump; one rescale absorbs it
    for _ in 0..2 {
        let dev = build(RMSE, force_gain);
        let path = save(dir, "gait_device.csv", "synthetic walk in minimal-impedance mode", &dev)?;
        let rep = transparency(&nd_pre, &preprocess(&read_recording(&path)?, &opts)?)?;
        for (j, name) in rep.joints.iter().zip(["hip", "knee", "ankle"]) {
            println!("  {name}: rmse {:.4} isv {:.4} pass {}", j.rmse, j.isv, j.pass);
        }
        println!("  force rms {:.4} max {:.4}", rep.force_rms, rep.force_max_abs);
        force_gain *= FORCE_RMS / rep.force_rms;
    }
    Ok(())
}
