use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn posefuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posefuse")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn synth(dir: &Path) {
    let o = posefuse(dir, &["synth", "--out-dir", ".", "--frames", "5", "--candidates", "5", "--box-jitter", "0.05"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&posefuse(d.path(), &["--help"])), 0);
    assert_eq!(code(&posefuse(d.path(), &["--version"])), 0);
    assert_eq!(code(&posefuse(d.path(), &[])), 1);
    assert_eq!(code(&posefuse(d.path(), &["gbg", "--bogus"])), 1);
    assert_eq!(code(&posefuse(d.path(), &["decode", "--heatmaps", "h", "--no-offset", "--stride", "3", "--out", "x"])), 1);
    assert_eq!(code(&posefuse(d.path(), &["pipeline", "--out-dir", "p", "--ratio", "3:0"])), 1);
}

#[test]
fn data_errors_exit_two() {
    let d = TempDir::new().unwrap();
    let o = posefuse(d.path(), &["gbg", "--boxes", "missing.json", "--out", "x.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));

    fs::write(d.path().join("bad.ognt"), b"OGNT\x01\x00\x00\x01\x05\x00\x00\x00\x00").unwrap();
    let o = posefuse(d.path(), &["decode", "--heatmaps", "bad.ognt", "--no-offset", "--out", "x.json"]);
    assert_eq!(code(&o), 2);

    fs::write(d.path().join("v2.json"), r#"{"schema_version":2,"frames":[]}"#).unwrap();
    assert_eq!(code(&posefuse(d.path(), &["gbg", "--boxes", "v2.json", "--out", "x.json"])), 2);
}

#[test]
fn undefined_metric_exits_three() {
    let d = TempDir::new().unwrap();
    let doc = r#"{"schema_version":1,"num_keypoints":2,"frames":[{"frame":0,"instances":[
        {"box":[0,0,10,10],"box_score":1,"pose_score":1,"final_score":1,"keypoints":[0,0,0,0,0,0],"track_id":1}]}]}"#;
    fs::write(d.path().join("u.json"), doc).unwrap();
    assert_eq!(code(&posefuse(d.path(), &["eval", "--pred", "u.json", "--gt", "u.json"])), 3);
}

#[test]
fn empty_box_file_gives_empty_output() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("e.json"), r#"{"schema_version":1,"frames":[]}"#).unwrap();
    let o = posefuse(d.path(), &["gbg", "--boxes", "e.json", "--out", "k.json"]);
    assert_eq!(code(&o), 0);
    let out: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("k.json")).unwrap()).unwrap();
    assert_eq!(out["frames"], serde_json::json!([]));
}

#[test]
fn encode_decode_round_trip() {
    let d = TempDir::new().unwrap();
    synth(d.path());
    let enc = ["encode", "--poses", "gt.json", "--width", "640", "--height", "480", "--stride", "8", "--radius", "16"];
    let o = posefuse(d.path(), &[&enc[..], &["--out-heatmaps", "h.ognt", "--out-offsets", "o.ognt"]].concat());
    assert_eq!(code(&o), 0);
    assert_eq!(&fs::read(d.path().join("h.ognt")).unwrap()[..8], b"OGNT\x01\x00\x00\x03");

    let err = |extra: &[&str]| {
        let base = ["decode", "--heatmaps", "h.ognt", "--stride", "8", "--radius", "16", "--gt", "gt.json", "--out", "d.json"];
        let o = posefuse(d.path(), &[&base[..], extra].concat());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let line = String::from_utf8(o.stdout).unwrap();
        line.trim().strip_prefix("mean_error_px ").unwrap().parse::<f64>().unwrap()
    };
    assert!(err(&["--offsets", "o.ognt"]) < 1e-4);
    assert!(err(&["--no-offset"]) > 1.0);
}

#[test]
fn chain_is_deterministic_and_scores_ground_truth_perfectly() {
    let d = TempDir::new().unwrap();
    synth(d.path());
    let first = fs::read(d.path().join("boxes.json")).unwrap();
    synth(d.path());
    assert_eq!(first, fs::read(d.path().join("boxes.json")).unwrap());

    assert_eq!(code(&posefuse(d.path(), &["gbg", "--boxes", "boxes.json", "--out", "kept.json"])), 0);
    assert_eq!(code(&posefuse(d.path(), &["nms", "--poses", "gt.json", "--out", "n.json"])), 0);
    assert_eq!(code(&posefuse(d.path(), &["track", "--poses", "n.json", "--out", "t.json"])), 0);
    let o = posefuse(d.path(), &["eval", "--pred", "t.json", "--gt", "gt.json"]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["ap"]["ap"], 1.0);
    assert_eq!(report["mota"]["mota"], 1.0);
}

#[test]
fn pipeline_output_is_byte_identical_across_runs() {
    let d = TempDir::new().unwrap();
    let args = ["pipeline", "--frames", "4", "--candidates", "3", "--box-jitter", "0.03", "--map-noise", "0.05", "--sigma", "1"];
    let run = |dir: &str| {
        let o = posefuse(d.path(), &[&args[..], &["--out-dir", dir]].concat());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(d.path().join(dir).join("poses.json")).unwrap(), fs::read(d.path().join(dir).join("metrics.json")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
