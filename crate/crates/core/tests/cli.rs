use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn swingid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swingid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_recording_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.csv"), "").unwrap();
    let o = swingid(tmp.path(), &["preprocess", "empty.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty.csv"), "{}", stderr(&o));
}

#[test]
fn missing_grf_column_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("gait_device.csv")).unwrap();
    let stripped: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(1);
            f.join(",") + "\n"
        })
        .collect();
    std::fs::write(tmp.path().join("no_grf.csv"), stripped).unwrap();
    let o = swingid(tmp.path(), &["preprocess", "no_grf.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grf_vertical"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_flags_are_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(swingid(tmp.path(), &["preprocess", "nope.csv"]).status.code(), Some(2));
    assert_eq!(
        swingid(tmp.path(), &["identify", "--perturbed", "x.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(swingid(tmp.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unstable_controller_exits_with_failure() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("hot.toml"), "[controller]\nc = 500.0\n").unwrap();
    let o = swingid(tmp.path(), &["--config", "hot.toml", "simulate-controller"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unstable"), "{}", stderr(&o));
}

#[test]
fn bad_config_value_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[controller]\nc = \"fast\"\n").unwrap();
    let o = swingid(tmp.path(), &["--config", "bad.toml", "simulate-controller"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("controller.c"), "{}", stderr(&o));
}

#[test]
fn step_run_writes_metrics_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let o = swingid(tmp.path(), &["--out", "a", "simulate-controller"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(tmp.path().join("a/metrics.txt")).unwrap();
    let value = |key: &str| -> f64 {
        metrics
            .lines()
            .find_map(|l| l.strip_prefix(key)?.trim().strip_prefix('=')?.trim().parse().ok())
            .unwrap()
    };
    assert!((0.85..=0.95).contains(&value("steady_state_ratio")));

    let o = swingid(tmp.path(), &["rerun", "a/manifest.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace.csv", "metrics.txt"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(f)).unwrap(),
            std::fs::read(tmp.path().join("a-rerun").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn rerun_refuses_a_changed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[input]\namplitude = 20.0\n").unwrap();
    assert!(
        swingid(tmp.path(), &["--config", "c.toml", "--out", "a", "simulate-controller"])
            .status
            .success()
    );
    std::fs::write(&cfg, "[input]\namplitude = 30.0\n").unwrap();
    let o = swingid(tmp.path(), &["rerun", "a/manifest.toml"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn transparency_report_from_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = swingid(
        tmp.path(),
        &[
            "preprocess",
            &data("gait_device.csv"),
            "--no-device",
            &data("gait_no_device.csv"),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = std::fs::read_to_string(tmp.path().join("out/transparency.txt")).unwrap();
    assert!(rep.contains("all_pass = true"), "{rep}");
    assert!(rep.contains("hip_rmse_rad = 0.030"), "{rep}");
}
