//! Command-line front end.
//!
//! Every subcommand writes its results into the output directory together
//! with a `manifest.toml` recording the invocation, the configuration hash
//! and the master seed. `swingid rerun <manifest>` repeats the run; results
//! depend only on the inputs, the configuration and the seed, so the rerun
//! reproduces every output file byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::ctrlsim::{
    loop_frf, simulate_loop, step_metrics, ControllerParams, LoopScenario, PlantModel, Profile, PvaLimits,
};
use crate::dynamics::{read_trajectory, ImpedanceParams, Trajectory};
use crate::error::{Error, Result};
use crate::gaitproc::{
    onset_datasets, preprocess, read_recording, transparency, Ensemble, EventKind, OnsetDataset, PreprocessOptions,
    Preprocessed, TransparencyReport,
};
use crate::ident::{best_fit, fit_traces, run_restarts, IdentOptions, IdentProblem, IdentResult, PredictionError};
use crate::model::BodyModel;
use crate::signal::stats;
use crate::synthval::{run_validation, ValidationConfig};
use crate::table::read_table;

pub const MANIFEST: &str = "manifest.toml";
const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "swingid",
    version,
    about = "Swing-leg joint impedance identification toolkit"
)]
pub struct Cli {
    /// Configuration file (TOML, dotted keys)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random draw [default: `seed` key, else 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out, or <manifest dir>-rerun for rerun]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel identification
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run the full factorial validation grid
    #[arg(long, global = true)]
    pub full: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Detect gait events, segment strides, reject outliers and build
    /// per-onset averages; with --no-device also the transparency report
    Preprocess {
        /// Recording with the device attached
        recording: PathBuf,
        /// Recording of the same participant walking without the device
        #[arg(long)]
        no_device: Option<PathBuf>,
    },
    /// Identify joint stiffness and damping for each perturbation onset
    Identify {
        /// Output directory of `preprocess`
        #[arg(long, conflicts_with_all = ["recording", "unperturbed"])]
        data: Option<PathBuf>,
        /// Raw recording, preprocessed on the fly
        #[arg(long, conflicts_with = "unperturbed")]
        recording: Option<PathBuf>,
        /// Unperturbed swing trajectory file (needs --perturbed and --onset)
        #[arg(long, requires_all = ["perturbed", "onset"])]
        unperturbed: Option<PathBuf>,
        #[arg(long, requires = "unperturbed")]
        perturbed: Option<PathBuf>,
        /// Perturbation onset after toe-off (s); selects one onset
        #[arg(long)]
        onset: Option<f64>,
    },
    /// Synthetic validation over a grid of known impedances
    Validate,
    /// Simulate the admittance-controlled perturbator
    SimulateController,
    /// Collect the key-value reports of output directories into one report
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Repeat a run from its manifest
    Rerun { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Preprocess { .. } => "preprocess",
            Command::Identify { .. } => "identify",
            Command::Validate => "validate",
            Command::SimulateController => "simulate-controller",
            Command::Report { .. } => "report",
            Command::Rerun { .. } => "rerun",
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Command::Preprocess { recording, no_device } => {
                std::iter::once(recording.clone()).chain(no_device.clone()).collect()
            }
            Command::Identify {
                data,
                recording,
                unperturbed,
                perturbed,
                ..
            } => [data, recording, unperturbed, perturbed]
                .into_iter()
                .flatten()
                .cloned()
                .collect(),
            Command::Report { dirs } => dirs.clone(),
            Command::Rerun { manifest } => vec![manifest.clone()],
            Command::Validate | Command::SimulateController => Vec::new(),
        }
    }

    /// Arguments that reproduce this subcommand on the command line.
    fn to_args(&self) -> Vec<String> {
        let p = |x: &PathBuf| x.display().to_string();
        let mut a = vec![self.name().to_string()];
        match self {
            Command::Preprocess { recording, no_device } => {
                a.push(p(recording));
                if let Some(n) = no_device {
                    a.extend(["--no-device".into(), p(n)]);
                }
            }
            Command::Identify {
                data,
                recording,
                unperturbed,
                perturbed,
                onset,
            } => {
                for (flag, v) in [
                    ("--data", data),
                    ("--recording", recording),
                    ("--unperturbed", unperturbed),
                    ("--perturbed", perturbed),
                ] {
                    if let Some(v) = v {
                        a.extend([flag.to_string(), p(v)]);
                    }
                }
                if let Some(o) = onset {
                    a.extend(["--onset".to_string(), o.to_string()]);
                }
            }
            Command::Report { dirs } => a.extend(dirs.iter().map(p)),
            Command::Rerun { manifest } => a.push(p(manifest)),
            Command::Validate | Command::SimulateController => {}
        }
        a
    }
}

/// Record of one run, written to `manifest.toml` in the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub config: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub version: String,
    pub threads: Option<usize>,
    pub full: bool,
    /// Subcommand and its arguments as passed on the command line.
    pub args: Vec<String>,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::new();
        let s = |v: &str| toml::Value::String(v.to_string());
        let path = |p: &Path| s(&p.display().to_string());
        t.insert("subcommand".into(), s(&self.subcommand));
        t.insert(
            "inputs".into(),
            toml::Value::Array(self.inputs.iter().map(|p| path(p)).collect()),
        );
        if let Some(c) = &self.config {
            t.insert("config".into(), path(c));
        }
        if let Some(h) = &self.config_sha256 {
            t.insert("config_sha256".into(), s(h));
        }
        // TOML integers are signed; the seed keeps its bit pattern
        t.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        t.insert("out".into(), path(&self.out));
        t.insert("version".into(), s(&self.version));
        if let Some(n) = self.threads {
            t.insert("threads".into(), toml::Value::Integer(n as i64));
        }
        t.insert("full".into(), toml::Value::Boolean(self.full));
        t.insert(
            "args".into(),
            toml::Value::Array(self.args.iter().map(|a| s(a)).collect()),
        );
        t.to_string()
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: m,
        };
        let t: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
        let string = |k: &str| -> Result<Option<String>> {
            match t.get(k) {
                None => Ok(None),
                Some(toml::Value::String(v)) => Ok(Some(v.clone())),
                Some(_) => Err(bad(format!("`{k}` must be a string"))),
            }
        };
        let strings = |k: &str| -> Result<Vec<String>> {
            match t.get(k) {
                Some(toml::Value::Array(a)) => a
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(String::from)
                            .ok_or_else(|| bad(format!("`{k}` must hold strings")))
                    })
                    .collect(),
                _ => Err(bad(format!("missing `{k}` list"))),
            }
        };
        let required = |k: &str| string(k)?.ok_or_else(|| bad(format!("missing `{k}`")));
        Ok(Self {
            subcommand: required("subcommand")?,
            inputs: strings("inputs")?.into_iter().map(PathBuf::from).collect(),
            config: string("config")?.map(PathBuf::from),
            config_sha256: string("config_sha256")?,
            seed: t
                .get("seed")
                .and_then(toml::Value::as_integer)
                .ok_or_else(|| bad("missing integer `seed`".into()))? as u64,
            out: PathBuf::from(required("out")?),
            version: required("version")?,
            threads: t.get("threads").and_then(toml::Value::as_integer).map(|n| n as usize),
            full: t.get("full").and_then(toml::Value::as_bool).unwrap_or(false),
            args: strings("args")?,
        })
    }
}

/// Entry point of the `swingid` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

/// Runs one invocation and returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, cli.out.as_deref());
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.u64_or("seed", 0)?,
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker threads: {e}")))?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let ctx = Ctx {
        cfg: &cfg,
        seed,
        out: &out,
        full: cli.full,
    };
    pool.install(|| match &cli.command {
        Command::Preprocess { recording, no_device } => cmd_preprocess(&ctx, recording, no_device.as_deref()),
        Command::Identify {
            data,
            recording,
            unperturbed,
            perturbed,
            onset,
        } => {
            let source = match (data, recording, unperturbed, perturbed) {
                (Some(d), _, _, _) => Source::Data(d),
                (_, Some(r), _, _) => Source::Recording(r),
                (_, _, Some(u), Some(p)) => Source::Pair(u, p),
                _ => {
                    return Err(Error::InvalidInput(
                        "identify needs --data, --recording or --unperturbed/--perturbed".into(),
                    ))
                }
            };
            cmd_identify(&ctx, source, *onset)
        }
        Command::Validate => cmd_validate(&ctx),
        Command::SimulateController => cmd_simulate_controller(&ctx),
        Command::Report { dirs } => cmd_report(&ctx, dirs),
        Command::Rerun { .. } => unreachable!("handled above"),
    })?;
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        inputs: cli.command.inputs(),
        config: cli.config.clone(),
        config_sha256: cli.config.as_ref().map(|_| cfg.digest().to_string()),
        seed,
        out: out.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: cli.threads,
        full: cli.full,
        args: cli.command.to_args(),
    };
    write_text(&out, MANIFEST, &manifest.to_toml())?;
    Ok(out)
}

fn rerun(manifest_path: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m = RunManifest::parse(&text, manifest_path)?;
    if let (Some(path), Some(hash)) = (&m.config, &m.config_sha256) {
        let now = Config::load(path)?;
        if now.digest() != hash {
            return Err(Error::Config(format!(
                "{} changed since the recorded run (sha256 {hash})",
                path.display()
            )));
        }
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = m.out.file_name().unwrap_or_default().to_os_string();
        name.push("-rerun");
        m.out.with_file_name(name)
    });
    let mut argv = vec!["swingid".to_string(), "--seed".into(), m.seed.to_string()];
    if let Some(c) = &m.config {
        argv.extend(["--config".into(), c.display().to_string()]);
    }
    if let Some(n) = m.threads {
        argv.extend(["--threads".into(), n.to_string()]);
    }
    if m.full {
        argv.push("--full".into());
    }
    argv.extend(["--out".into(), out.display().to_string()]);
    argv.extend(m.args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::InvalidInput(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(Error::InvalidInput(
            "a rerun manifest cannot point at another rerun".into(),
        ));
    }
    run(&cli)
}

struct Ctx<'a> {
    cfg: &'a Config,
    seed: u64,
    out: &'a Path,
    full: bool,
}

enum Source<'a> {
    Data(&'a Path),
    Recording(&'a Path),
    Pair(&'a Path, &'a Path),
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let (path, mut w) = create(dir, name)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_with(dir, name, |w| w.write_all(text.as_bytes()))
}

/// `key = value` lines that parse as TOML.
#[derive(Default)]
struct KeyValues(String);

impl KeyValues {
    fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.put(key, toml::Value::Float(v))
    }

    fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.put(key, toml::Value::Integer(v as i64))
    }

    fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.put(key, toml::Value::Boolean(v))
    }

    fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.put(key, toml::Value::String(v.to_string()))
    }

    fn put(&mut self, key: &str, v: toml::Value) -> &mut Self {
        self.0.push_str(&format!("{key} = {v}\n"));
        self
    }
}

fn onset_tag(onset: f64) -> String {
    format!("{:03}ms", (onset * 1000.0).round() as i64)
}

fn write_ensemble(dir: &Path, name: &str, e: &Ensemble, unit: &str, ids: &[usize]) -> Result<()> {
    let (mean, std) = (e.mean(), e.std());
    let (q1, q3) = e.quartiles();
    let last = (e.points() - 1).max(1) as f64;
    write_with(dir, name, |w| {
        write!(w, "phase [%],mean [{unit}],std [{unit}],q1 [{unit}],q3 [{unit}]")?;
        for id in ids {
            write!(w, ",stride_{id} [{unit}]")?;
        }
        writeln!(w)?;
        for i in 0..e.points() {
            write!(
                w,
                "{},{},{},{},{}",
                100.0 * i as f64 / last,
                mean[i],
                std[i],
                q1[i],
                q3[i]
            )?;
            for s in &e.strides {
                write!(w, ",{}", s[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn write_preprocessed(dir: &Path, pre: &Preprocessed, prefix: &str) -> Result<()> {
    let rec = &pre.recording;
    write_with(dir, &format!("{prefix}events.csv"), |w| {
        writeln!(w, "index [-],time [s],event")?;
        for e in &pre.events {
            let kind = match e.kind {
                EventKind::HeelStrike => "heel_strike",
                EventKind::ToeOff => "toe_off",
            };
            writeln!(w, "{},{},{kind}", e.index, rec.time(e.index))?;
        }
        Ok(())
    })?;
    write_with(dir, &format!("{prefix}strides.csv"), |w| {
        writeln!(
            w,
            "stride [-],start [-],toe_off [-],end [-],start_time [s],swing_duration [s],\
             perturbation_onset [s],perturbation_amplitude [N],status"
        )?;
        for (i, s) in pre.strides.iter().enumerate() {
            let status = if s.is_perturbed() {
                "perturbed"
            } else if pre.kept.contains(&i) {
                "kept"
            } else {
                "outlier"
            };
            let (on, amp) = s
                .perturbation
                .map_or((String::new(), String::new()), |(o, a)| (o.to_string(), a.to_string()));
            writeln!(
                w,
                "{i},{},{},{},{},{},{on},{amp},{status}",
                s.start,
                s.toe_off,
                s.end,
                rec.time(s.start),
                s.swing_duration()
            )?;
        }
        Ok(())
    })?;
    for (e, name) in pre.angles.iter().zip(["hip", "knee", "ankle"]) {
        write_ensemble(dir, &format!("{prefix}ensemble_{name}.csv"), e, "rad", &pre.kept)?;
    }
    write_ensemble(
        dir,
        &format!("{prefix}ensemble_force_x.csv"),
        &pre.force,
        "N",
        &pre.kept,
    )
}

fn transparency_report(r: &TransparencyReport) -> KeyValues {
    let mut kv = KeyValues::default();
    for (j, name) in r.joints.iter().zip(["hip", "knee", "ankle"]) {
        kv.num(&format!("{name}_rmse_rad"), j.rmse)
            .num(&format!("{name}_isv_ave_rad"), j.isv)
            .flag(&format!("{name}_pass"), j.pass);
    }
    kv.num("force_rms_n", r.force_rms)
        .num("force_max_abs_n", r.force_max_abs)
        .flag("all_pass", r.joints.iter().all(|j| j.pass));
    kv
}

fn cmd_preprocess(ctx: &Ctx, recording: &Path, no_device: Option<&Path>) -> Result<()> {
    let opts = PreprocessOptions::from_config(ctx.cfg)?;
    let pre = preprocess(&read_recording(recording)?, &opts)?;
    write_preprocessed(ctx.out, &pre, "")?;
    let mut kv = KeyValues::default();
    kv.text("recording", &recording.display().to_string())
        .num("sample_rate_hz", opts.sample_rate)
        .int("events", pre.events.len())
        .int("strides", pre.strides.len())
        .int(
            "perturbed_strides",
            pre.strides.iter().filter(|s| s.is_perturbed()).count(),
        )
        .int("kept_strides", pre.kept.len())
        .int("outlier_strides", pre.discarded.len());
    let onsets = if pre.strides.iter().any(|s| s.is_perturbed()) {
        onset_datasets(&pre, &opts)?
    } else {
        Vec::new()
    };
    write_onsets(ctx.out, &onsets)?;
    kv.int("onsets", onsets.len());
    write_text(ctx.out, "preprocess.txt", &kv.0)?;
    if let Some(nd) = no_device {
        let base = preprocess(&read_recording(nd)?, &opts)?;
        write_preprocessed(ctx.out, &base, "no_device_")?;
        let report = transparency(&base, &pre)?;
        write_text(ctx.out, "transparency.txt", &transparency_report(&report).0)?;
        write_with(ctx.out, "transparency.csv", |w| {
            writeln!(w, "joint,rmse [rad],isv_ave [rad],pass")?;
            for (j, name) in report.joints.iter().zip(["hip", "knee", "ankle"]) {
                writeln!(
                    w,
                    "{name},{},{},{}",
                    j.rmse,
                    j.isv,
                    if j.pass { "pass" } else { "fail" }
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn write_onsets(dir: &Path, sets: &[OnsetDataset]) -> Result<()> {
    write_with(dir, "onsets.csv", |w| {
        writeln!(w, "onset [s],amplitude [N],perturbed [-],removed [-]")?;
        for d in sets {
            writeln!(
                w,
                "{},{},{},{}",
                d.onset,
                d.amplitude,
                d.perturbed.len(),
                d.removed.len()
            )?;
        }
        Ok(())
    })?;
    for d in sets {
        let tag = onset_tag(d.onset);
        write_with(dir, &format!("onset_{tag}_unperturbed.csv"), |w| {
            d.unperturbed_mean.write(w)
        })?;
        write_with(dir, &format!("onset_{tag}_perturbed.csv"), |w| {
            d.perturbed_mean.write(w)
        })?;
    }
    Ok(())
}

struct Experiment {
    onset: f64,
    unperturbed: Trajectory,
    perturbed: Trajectory,
}

fn load_experiments(ctx: &Ctx, source: Source) -> Result<Vec<Experiment>> {
    match source {
        Source::Pair(u, p) => Ok(vec![Experiment {
            onset: f64::NAN,
            unperturbed: read_trajectory(u)?,
            perturbed: read_trajectory(p)?,
        }]),
        Source::Data(dir) => {
            let table = read_table(dir.join("onsets.csv"))?;
            table
                .column("onset")?
                .iter()
                .map(|&onset| {
                    let tag = onset_tag(onset);
                    Ok(Experiment {
                        onset,
                        unperturbed: read_trajectory(dir.join(format!("onset_{tag}_unperturbed.csv")))?,
                        perturbed: read_trajectory(dir.join(format!("onset_{tag}_perturbed.csv")))?,
                    })
                })
                .collect()
        }
        Source::Recording(path) => {
            let opts = PreprocessOptions::from_config(ctx.cfg)?;
            let pre = preprocess(&read_recording(path)?, &opts)?;
            Ok(onset_datasets(&pre, &opts)?
                .into_iter()
                .map(|d| Experiment {
                    onset: d.onset,
                    unperturbed: d.unperturbed_mean,
                    perturbed: d.perturbed_mean,
                })
                .collect())
        }
    }
}

fn cmd_identify(ctx: &Ctx, source: Source, onset: Option<f64>) -> Result<()> {
    let model = BodyModel::from_config(ctx.cfg)?;
    let mut opts = IdentOptions::from_config(ctx.cfg)?;
    opts.seed = ctx.seed;
    let mut experiments = load_experiments(ctx, source)?;
    match onset {
        Some(o) if !(o.is_finite()) => return Err(Error::InvalidInput("--onset must be finite".into())),
        Some(o) => {
            for e in experiments.iter_mut().filter(|e| e.onset.is_nan()) {
                e.onset = o;
            }
            experiments.retain(|e| (e.onset - o).abs() <= 0.5 * e.unperturbed.dt);
            if experiments.is_empty() {
                return Err(Error::NoValidStrides(format!("no perturbed strides with onset {o} s")));
            }
        }
        None if experiments.iter().any(|e| e.onset.is_nan()) => {
            return Err(Error::InvalidInput(
                "--onset is required with --unperturbed/--perturbed".into(),
            ))
        }
        None if experiments.is_empty() => {
            return Err(Error::NoValidStrides("no perturbation onsets in the data".into()))
        }
        None => {}
    }
    let mut summary = Vec::new();
    for e in experiments {
        let tag = onset_tag(e.onset);
        let problem = IdentProblem::new(model, e.unperturbed, e.perturbed, e.onset, opts.inverse)?;
        let pe = PredictionError::new(&problem, opts.sim)?;
        let restarts = run_restarts(&pe, &opts)?;
        write_restarts(ctx.out, &tag, &restarts)?;
        let result = best_fit(&pe, restarts)?;
        let fit = fit_traces(&problem, &result.params, opts.sim)?;
        write_with(ctx.out, &format!("fit_{tag}.csv"), |w| {
            writeln!(
                w,
                "time [s],hip_measured [rad],hip_model [rad],knee_measured [rad],knee_model [rad],\
                 ankle_measured [rad],ankle_model [rad]"
            )?;
            for i in 0..fit.t.len() {
                write!(w, "{}", fit.t[i])?;
                for j in 0..3 {
                    write!(w, ",{},{}", fit.measured[j][i], fit.predicted[j][i])?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        write_text(ctx.out, &format!("ident_{tag}.txt"), &ident_report(e.onset, &result).0)?;
        summary.push((e.onset, result));
    }
    write_with(ctx.out, "identification.csv", |w| {
        writeln!(
            w,
            "onset [s],K_hip [N*m/rad],K_knee [N*m/rad],K_ankle [N*m/rad],D_hip [N*m*s/rad],\
             D_knee [N*m*s/rad],D_ankle [N*m*s/rad],vaf_hip [%],vaf_knee [%],vaf_ankle [%],residual [rad^2]"
        )?;
        for (onset, r) in &summary {
            write!(w, "{onset}")?;
            for v in r.params.to_array().iter().chain(&r.vaf) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", r.residual_norm)?;
        }
        Ok(())
    })
}

fn write_restarts(dir: &Path, tag: &str, restarts: &[crate::ident::RestartInfo]) -> Result<()> {
    write_with(dir, &format!("restarts_{tag}.csv"), |w| {
        let names = ImpedanceParams::NAMES;
        let init: Vec<String> = names.iter().map(|n| format!("{n}_init")).collect();
        writeln!(
            w,
            "restart,{},{},cost,converged,iterations,evaluations,termination",
            init.join(","),
            names.join(",")
        )?;
        for (i, r) in restarts.iter().enumerate() {
            let cells: Vec<String> = r
                .initial
                .to_array()
                .iter()
                .chain(&r.estimate.to_array())
                .map(|v| v.to_string())
                .collect();
            let why = match (&r.termination, &r.failure) {
                (_, Some(f)) => format!("\"{}\"", f.replace('"', "'")),
                (Some(t), None) => format!("{t:?}"),
                (None, None) => String::new(),
            };
            writeln!(
                w,
                "{i},{},{},{},{},{},{why}",
                cells.join(","),
                r.cost,
                u8::from(r.converged),
                r.iterations,
                r.evaluations
            )?;
        }
        Ok(())
    })
}

fn ident_report(onset: f64, r: &IdentResult) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.num("onset_s", onset);
    for (name, v) in ImpedanceParams::NAMES.iter().zip(r.params.to_array()) {
        kv.num(name, v);
    }
    for (name, v) in ["vaf_hip_pct", "vaf_knee_pct", "vaf_ankle_pct"].iter().zip(r.vaf) {
        kv.num(name, v);
    }
    kv.num("residual_rad2", r.residual_norm)
        .int("best_restart", r.best_index)
        .int("converged_restarts", r.restarts.iter().filter(|x| x.converged).count())
        .int("restarts", r.restarts.len());
    for (name, b) in ImpedanceParams::NAMES.iter().zip(r.at_bound) {
        if b {
            kv.flag(&format!("{name}_at_bound"), true);
        }
    }
    kv
}

fn cmd_validate(ctx: &Ctx) -> Result<()> {
    let model = BodyModel::from_config(ctx.cfg)?;
    let mut vc = ValidationConfig::from_config(ctx.cfg, &model)?;
    vc.seed = ctx.seed;
    vc.full |= ctx.full;
    let report = run_validation(&model, &vc)?;
    write_with(ctx.out, "validation_table.csv", |w| report.write_table(w))?;
    write_with(ctx.out, "validation_summary.csv", |w| report.write_summary(w))?;
    let mut kv = KeyValues::default();
    kv.int("combinations", report.rows.len())
        .int("identified", report.stats.count)
        .int("failures", report.failures)
        .num("noise_peak_to_peak", vc.noise.peak_to_peak)
        .flag("full_grid", vc.full);
    for (i, name) in ImpedanceParams::NAMES.iter().enumerate() {
        kv.num(&format!("{name}_min_error"), report.stats.min[i])
            .num(&format!("{name}_max_error"), report.stats.max[i])
            .num(&format!("{name}_std_error"), report.stats.std[i]);
    }
    write_text(ctx.out, "validation.txt", &kv.0)?;
    if report.stats.count == 0 {
        return Err(Error::IdentificationFailed {
            restarts: vc.ident.n_restarts,
            best_cost: f64::NAN,
        });
    }
    Ok(())
}

fn cmd_simulate_controller(ctx: &Ctx) -> Result<()> {
    let params = ControllerParams::from_config(ctx.cfg)?;
    let limits = PvaLimits::from_config(ctx.cfg)?;
    let plant = PlantModel::from_config(ctx.cfg)?;
    let scenario = LoopScenario::from_config(ctx.cfg, ctx.seed)?;
    let fs = params.sample_rate;
    let desired = scenario.desired_force(fs)?;
    let trace = simulate_loop(&params, &limits, &plant, &desired)?;
    write_with(ctx.out, "trace.csv", |w| trace.write(w))?;
    let mut kv = KeyValues::default();
    let profile = match scenario.profile {
        Profile::Zero => "zero",
        Profile::Step { .. } => "step",
        Profile::FilteredNoise { .. } => "noise",
        Profile::Samples(_) => "samples",
    };
    kv.text("profile", profile)
        .num("duration_s", trace.len() as f64 * trace.dt)
        .num("force_rms_n", stats::rms(&trace.measured))
        .num("force_max_abs_n", stats::max_abs(&trace.measured))
        .num(
            "limiter_active_fraction",
            trace.limiter_active.iter().filter(|a| **a).count() as f64 / trace.len().max(1) as f64,
        );
    match &trace.trip {
        Some(t) => kv.text("safety_trip", t.kind).num("safety_trip_time_s", t.t),
        None => kv.text("safety_trip", "none"),
    };
    if let (Some((k, w)), Profile::Step { amplitude, .. }) = (scenario.step_range(fs), &scenario.profile) {
        let end = (k + w).min(trace.len());
        let m = step_metrics(&trace.measured[k..end], trace.dt)?;
        kv.num("command_n", *amplitude)
            .num("steady_state_n", m.steady_state)
            .num("steady_state_ratio", m.steady_state / amplitude)
            .num("rise_time_s", m.rise_time)
            .num("overshoot_pct", m.overshoot)
            .num("peak_n", m.peak);
    }
    if let Profile::FilteredNoise { .. } = scenario.profile {
        let s = loop_frf(
            &desired,
            &trace.measured,
            fs,
            scenario.frf_segment,
            scenario.frf_overlap,
        )?;
        write_with(ctx.out, "frf.csv", |w| {
            writeln!(w, "frequency [Hz],gain [-],gain [dB],phase [deg],coherence [-]")?;
            for (i, h) in s.frf.h.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.frf.freq[i],
                    h.norm(),
                    20.0 * h.norm().log10(),
                    h.arg().to_degrees(),
                    s.frf.coherence[i]
                )?;
            }
            Ok(())
        })?;
        kv.num("low_frequency_gain", s.low_frequency_gain)
            .int("frf_segments", s.frf.segments);
        match s.bandwidth {
            Some(b) => kv.num("bandwidth_hz", b),
            None => kv.text("bandwidth_hz", "above band"),
        };
    }
    write_text(ctx.out, "metrics.txt", &kv.0)
}

fn cmd_report(ctx: &Ctx, dirs: &[PathBuf]) -> Result<()> {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for dir in dirs {
        let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<PathBuf> = rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidInput(format!("{} holds no reports", dir.display())));
        }
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
                path: f.clone(),
                line: 0,
                message: e.message().to_string(),
            })?;
            let source = f.display().to_string();
            for line in text.lines() {
                let Some(key) = line.split('=').next().map(str::trim).filter(|k| !k.is_empty()) else {
                    continue;
                };
                if let Some(v) = table.get(key) {
                    let v = match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    rows.push((source.clone(), key.to_string(), v));
                }
            }
        }
    }
    write_with(ctx.out, "report.csv", |w| {
        writeln!(w, "source,key,value")?;
        for (s, k, v) in &rows {
            writeln!(w, "{s},{k},{v}")?;
        }
        Ok(())
    })?;
    let width = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    write_with(ctx.out, "report.md", |w| {
        let mut current = "";
        for (s, k, v) in &rows {
            if s != current {
                writeln!(w, "{}## {s}\n", if current.is_empty() { "" } else { "\n" })?;
                current = s;
            }
            writeln!(w, "    {k:<width$}  {v}")?;
        }
        Ok(())
    })
}
