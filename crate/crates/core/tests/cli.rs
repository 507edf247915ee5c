mod common;

use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3

[trajectory]
duration = 10.0

[orientation]
hidden = 4
m = 4

[position]
hidden = 4
m = 4
k = 2

[train]
epochs = 3
batch_size = 16

[table1]
ratios = [2, 4]

[fig5]
modes = ["u", "r"]
duration = 12.0

[baseline]
horizon = 2.0
"#;

fn casnav(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casnav")).args(args).current_dir(dir).output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn tiny(dir: &Path, extra: &str) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, format!("{TINY}{extra}")).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(casnav(&["--help"], d).status.code(), Some(0));
    assert!(String::from_utf8_lossy(&casnav(&["--help"], d).stdout).contains("Exit codes"));
    assert_eq!(casnav(&["bogus"], d).status.code(), Some(1));
    assert_eq!(casnav(&["simulate", "--config", "missing.toml"], d).status.code(), Some(1));

    std::fs::write(d.join("bad.toml"), "[trajectory]\nduratoin = 3.0\n").unwrap();
    let o = casnav(&["simulate", "--config", "bad.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duratoin"));

    std::fs::write(d.join("zero.toml"), "[table1]\nratios = [1]\n").unwrap();
    let o = casnav(&["eval-table1", "--config", "zero.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("table1.ratios"));

    let o = casnav(&["replay", "--checkpoint", "nowhere", "--input", "none.ndjson"], d);
    assert_eq!(o.status.code(), Some(1));

    // A diverging learning rate is a numerical failure.
    let cfg = tiny(d, "");
    let cfg_text = std::fs::read_to_string(&cfg).unwrap().replace("epochs = 3", "epochs = 3\nlr = 1e300");
    std::fs::write(&cfg, cfg_text).unwrap();
    let o = casnav(&["train", "--config", &cfg, "--target", "orientation", "--out", "nan"], d);
    assert_eq!(o.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny(d, "");
    ok(&casnav(&["simulate", "--config", &cfg, "--out", "a/nested"], d));
    ok(&casnav(&["simulate", "--config", &cfg, "--out", "b"], d));
    let files = ["imu.csv", "position.csv", "orientation.csv", "track.csv", "events.ndjson", "manifest.json"];
    for f in files {
        let a = std::fs::read(d.join("a/nested").join(f)).unwrap();
        assert_eq!(a, std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let imu = std::fs::read_to_string(d.join("b/imu.csv")).unwrap();
    assert_eq!(imu.lines().count(), 2000 + 1);
    let pos = std::fs::read_to_string(d.join("b/position.csv")).unwrap();
    assert_eq!(pos.lines().count(), 200 + 1);

    ok(&casnav(&["simulate", "--config", &cfg, "--out", "c", "--seed", "4"], d));
    assert_ne!(std::fs::read(d.join("b/imu.csv")).unwrap(), std::fs::read(d.join("c/imu.csv")).unwrap());
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny(d, "");
    for target in ["orientation", "position"] {
        ok(&casnav(&["train", "--config", &cfg, "--target", target, "--checkpoint", "one.json"], d));
        ok(&casnav(&["train", "--config", &cfg, "--target", target, "--checkpoint", "two.json"], d));
        let a = std::fs::read(d.join("one.json")).unwrap();
        assert_eq!(a, std::fs::read(d.join("two.json")).unwrap(), "{target}");
    }
}

#[test]
fn stationary_position_learns_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny(d, "").replace("tiny.toml", "still.toml");
    let text = TINY.replace("k = 2", "k = 1").replace("duration = 10.0", "duration = 10.0\nstationary = true");
    std::fs::write(&cfg, text).unwrap();
    ok(&casnav(&["train", "--config", &cfg, "--target", "position", "--out", "still"], d));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("still/position_report.json")).unwrap()).unwrap();
    let mae = report["test_mae"].as_array().unwrap();
    assert_eq!(report["unit"], "mm");
    for v in mae {
        assert!(v.as_f64().unwrap() < 0.1, "test MAE {v} mm");
    }

    // The trained runtime holds still between truths.
    ok(&casnav(&["train", "--config", &cfg, "--target", "orientation", "--out", "still"], d));
    ok(&casnav(&["simulate", "--config", &cfg, "--out", "still"], d));
    ok(&casnav(&["replay", "--config", &cfg, "--checkpoint", "still", "--input", "still/events.ndjson", "--out", "still"], d));
    let poses = std::fs::read_to_string(d.join("still/poses.ndjson")).unwrap();
    let p: Vec<[f64; 3]> = poses
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            ["px", "py", "pz"].map(|k| v[k].as_f64().unwrap() / 1000.0)
        })
        .collect();
    assert!(p.len() > 1000);
    for w in p.windows(2) {
        assert!((0..3).all(|a| (w[1][a] - w[0][a]).abs() < 1e-4), "{:?}", w);
    }
}

#[test]
fn evaluation_tables_and_services() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = tiny(d, "");
    let t1 = casnav(&["eval-table1", "--config", &cfg, "--out", "ev"], d);
    ok(&t1);
    let csv = std::fs::read_to_string(d.join("ev/table1.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&t1.stdout), csv);
    assert_eq!(csv.lines().next().unwrap(), "axis,ratio_2,ratio_4");
    assert_eq!(csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect::<Vec<_>>(), ["pitch", "roll", "yaw"]);

    ok(&casnav(&["eval-fig5", "--config", &cfg, "--out", "ev"], d));
    let fig = std::fs::read_to_string(d.join("ev/fig5.csv")).unwrap();
    assert_eq!(fig.lines().count(), 1 + 2 * 2);
    assert!(fig.lines().skip(1).all(|l| l.split(',').count() == 6));

    ok(&casnav(&["train", "--config", &cfg, "--target", "orientation", "--out", "m"], d));
    ok(&casnav(&["train", "--config", &cfg, "--target", "position", "--out", "m"], d));
    let cmp = casnav(&["compare-baseline", "--config", &cfg, "--checkpoint", "m", "--out", "cmp"], d);
    ok(&cmp);
    let terminal: serde_json::Value = serde_json::from_slice(&cmp.stdout).unwrap();
    assert!(terminal["dead_reckoning_mm"].as_f64().unwrap() > terminal["fusion_mm"].as_f64().unwrap());

    // serve on a recorded file equals replay, with a malformed line in it.
    ok(&casnav(&["simulate", "--config", &cfg, "--out", "sim"], d));
    let mut events = std::fs::read_to_string(d.join("sim/test_events.ndjson")).unwrap();
    let cut = events.match_indices('\n').nth(40).unwrap().0 + 1;
    events.insert_str(cut, "{not json\n");
    std::fs::write(d.join("rec.ndjson"), &events).unwrap();
    let replay = casnav(
        &["replay", "--config", &cfg, "--checkpoint", "m", "--input", "rec.ndjson", "--sidecar", "sim/track.csv", "--out", "rp"],
        d,
    );
    ok(&replay);
    let summary: serde_json::Value = serde_json::from_slice(&replay.stdout).unwrap();
    assert_eq!(summary["malformed_lines"], 1);
    assert!(summary["position_mae_mm"].as_array().is_some());
    let served = Command::new(env!("CARGO_BIN_EXE_casnav"))
        .args(["serve", "--config", &cfg, "--checkpoint", "m"])
        .current_dir(d)
        .stdin(std::fs::File::open(d.join("rec.ndjson")).unwrap())
        .output()
        .unwrap();
    ok(&served);
    assert_eq!(served.stdout, std::fs::read(d.join("rp/poses.ndjson")).unwrap());
    let err = String::from_utf8_lossy(&served.stderr);
    assert!(err.contains("line 42"), "{err}");
    assert!(err.lines().last().unwrap().contains("output_rate_hz"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    use casnav::eval::ExperimentConfig;
    let default = ExperimentConfig::load(&common::configs_dir().join("default.toml")).unwrap();
    assert_eq!(default, ExperimentConfig::default());
    default.validate().unwrap();
    assert_eq!(default.position.k, 10);
    assert_eq!(default.table1.ratios, [2, 4, 6, 8, 10]);
}
