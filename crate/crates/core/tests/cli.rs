use std::path::Path;
use std::process::{Command, Output};

use augundo::pipeline::io;
use augundo::pipeline::{AugmentationConfig, DepthMetrics};

fn augundo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augundo")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = augundo(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = walk(dir)
        .into_iter()
        .map(|f| (f.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&f).unwrap()))
        .collect();
    v.sort();
    v
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn harness_report_is_deterministic() {
    let a = ok(&["harness", "--seed", "7"]);
    let b = ok(&["harness", "--seed", "7"]);
    assert_eq!(a, b);
    assert!(a.lines().all(|l| !l.starts_with("FAIL")));
    assert!(a.contains("PASS round_trip_exact"));
    assert!(a.trim_end().ends_with("checks passed"));
}

#[test]
fn harness_exclusions_show_up_in_the_report() {
    let out = ok(&["harness", "--seed", "1", "--records", "10", "--exclude", "FLP,RZD", "--preset", "kitti"]);
    assert!(out.contains("PASS family_FLP excluded"));
    assert!(out.contains("PASS family_RZD excluded"));
}

#[test]
fn flips_only_augment_then_undo_returns_the_input_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let sample = tmp.path().join("sample");
    ok(&["scenegen", "--kind", "step", "--seed", "3", "--out", p(&sample)]);
    let cfg = tmp.path().join("flips.json");
    std::fs::write(&cfg, AugmentationConfig::flips_only(1.0).to_json()).unwrap();
    for seed in 0..6 {
        let aug = tmp.path().join(format!("aug{seed}"));
        ok(&["augment", "--sample", p(&sample), "--config", p(&cfg), "--seed", &seed.to_string(), "--out", p(&aug)]);
        let undone = tmp.path().join(format!("undo{seed}"));
        ok(&[
            "undo",
            "--depth",
            p(&aug.join("augmented_ground_truth.png")),
            "--record",
            p(&aug.join("record.json")),
            "--out",
            p(&undone),
        ]);
        let (_, want) = io::load_depth_values(&sample.join("ground_truth.png")).unwrap();
        let (_, got) = io::load_depth_values(&undone.join("depth.png")).unwrap();
        assert_eq!(got, want, "seed {seed}");
        assert!(io::load_mask(&undone.join("mask.png")).unwrap().data().iter().all(|&b| b));
    }
}

#[test]
fn metrics_on_identical_maps_is_all_zero() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["scenegen", "--out", p(tmp.path())]);
    let gt = tmp.path().join("ground_truth.png");
    let out = ok(&["metrics", "--pred", p(&gt), "--gt", p(&gt)]);
    let m: DepthMetrics = serde_json::from_str(out.trim()).unwrap();
    assert_eq!((m.mae, m.rmse, m.imae, m.irmse, m.abs_rel, m.sq_rel), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!((m.delta1, m.delta2, m.delta3), (1.0, 1.0, 1.0));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["scenegen", "--count", "5", "--workers", "3", "--seed", "11", "--out", p(&data)]);
    let samples: Vec<String> = (0..5).map(|i| p(&data.join(format!("sample_{i:04}"))).to_owned()).collect();
    let mut outs = Vec::new();
    for workers in ["1", "4"] {
        let out = tmp.path().join(format!("w{workers}"));
        let mut args = vec!["loss", "--seed", "5", "--workers", workers, "--out", p(&out)];
        for s in &samples {
            args.extend(["--sample", s.as_str()]);
        }
        let stdout = ok(&args);
        assert_eq!(stdout.lines().count(), 5);
        outs.push((stdout, files(&out)));
    }
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].1.iter().any(|(name, _)| name.ends_with("loss.json")));
}

#[test]
fn loss_writes_report_and_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let sample = tmp.path().join("s");
    ok(&["scenegen", "--out", p(&sample)]);
    let out = tmp.path().join("out");
    let stdout = ok(&["loss", "--sample", p(&sample), "--preset", "kitti", "--seed", "2", "--out", p(&out)]);
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(report["total"].as_f64().unwrap().is_finite());
    for f in ["plan.json", "record.json", "loss.json", "depth.png", "mask.png", "reconstruction_prev.png"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    // Replaying the persisted plan reproduces the report exactly.
    let replay = tmp.path().join("replay");
    let again = ok(&[
        "loss",
        "--sample",
        p(&sample),
        "--plan",
        p(&out.join("plan.json")),
        "--out",
        p(&replay),
    ]);
    assert_eq!(again, stdout);
}

#[test]
fn failures_exit_with_a_single_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");

    let out = augundo(&["undo", "--depth", p(&missing.join("d.png")), "--record", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: kind=Io msg=\""), "{err}");

    let out = augundo(&["augment", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: kind=Usage msg=\""));

    ok(&["scenegen", "--out", p(&tmp.path().join("s"))]);
    std::fs::write(tmp.path().join("s").join("calibration.json"), "{\"fy\": 1}").unwrap();
    let out = augundo(&["loss", "--sample", p(&tmp.path().join("s")), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: kind=MissingKey"));

    let out = augundo(&["scenegen", "--kind", "step", "--split", "0", "--out", p(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: kind=BadKind"));
}
