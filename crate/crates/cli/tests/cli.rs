use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set",
    "encoder.d_model=8",
    "--set",
    "encoder.heads=2",
    "--set",
    "encoder.layers=1",
    "--set",
    "encoder.window_len=8",
    "--set",
    "encoder.kernel_size=3",
    "--set",
    "encoder.dilations=[1]",
    "--set",
    "data.overlap=2",
    "--set",
    "training.epochs=1",
    "--set",
    "training.batch_size=8",
];

fn bin(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motion-manifold"))
        .args(args)
        .args(TINY)
        .env("MOTION_MANIFOLD_OUTPUT", root)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes a small dataset and trains a tiny model; returns (data, checkpoint).
fn fixture(root: &Path) -> (PathBuf, PathBuf) {
    let data = root.join("data");
    let ckpt = root.join("ckpt");
    ok(bin(root, &["synth", "--out", s(&data), "--classes", "2", "--videos-per-class", "3", "--frames", "20", "--seed", "3"]));
    ok(bin(root, &["train", "--features", s(&data), "--checkpoint", s(&ckpt), "--seed", "3"]));
    (data, ckpt)
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&bin(dir.path(), &["score", "--bogus"])), 1);
    assert_eq!(code(&bin(dir.path(), &["--help"])), 0);
    assert_eq!(code(&bin(dir.path(), &["synth", "--set", "training.nope=1"])), 1);
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["stats", "--ratings", s(&dir.path().join("absent.csv"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pipeline_score_sweep_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (data, ckpt) = fixture(root);
    assert!(ckpt.join("run.json").is_file());
    assert!(ckpt.join("history.csv").is_file());
    let centroids = ckpt.join("centroids.json");

    // one CSV row per video, JSON copy equal to the CSV content
    let scores = root.join("out/scores.csv");
    ok(bin(root, &["score", "--checkpoint", s(&ckpt), "--centroids", s(&centroids), "--features", s(&data), "--out", s(&scores)]));
    let text = fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "video_id,label,s_cons,s_temp,n_windows");
    assert_eq!(lines.count(), 6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(scores.with_extension("json")).unwrap()).unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let mut reader = text.lines().skip(1);
    for row in rows {
        let csv_row: Vec<&str> = reader.next().unwrap().split(',').collect();
        assert_eq!(row["video_id"].as_str().unwrap(), csv_row[0]);
        let (a, b) = (row["s_cons"].as_f64().unwrap(), csv_row[2].parse::<f64>().unwrap());
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        assert!(row["s_temp"].as_f64().unwrap() >= 0.0);
    }
    assert!(root.join("out/run.json").is_file());

    // same seed and config give identical scores
    let again = root.join("again/scores.csv");
    ok(bin(root, &["score", "--checkpoint", s(&ckpt), "--centroids", s(&centroids), "--features", s(&data), "--out", s(&again)]));
    assert_eq!(text, fs::read_to_string(&again).unwrap());

    // sweep: kinds × severities plus one undistorted baseline row, one SVG per metric
    let sweep = root.join("sweep");
    ok(bin(
        root,
        &[
            "sweep", "--checkpoint", s(&ckpt), "--centroids", s(&centroids), "--features", s(&data), "--split", "test",
            "--kinds", "shuffle,reverse,copy", "--severities", "0,0.1,0.25,0.5,0.75,1.0", "--out", s(&sweep),
        ],
    ));
    let table = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 3 * 6 + 1);
    assert_eq!(table.lines().filter(|l| l.starts_with("none,")).count(), 1);
    assert!(fs::read_to_string(sweep.join("s_cons.svg")).unwrap().starts_with("<svg"));
    assert!(sweep.join("s_temp.svg").is_file());
    let sj: serde_json::Value = serde_json::from_str(&fs::read_to_string(sweep.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sj["rows"].as_array().unwrap().len(), 19);

    let bad = bin(root, &["sweep", "--checkpoint", s(&ckpt), "--centroids", s(&centroids), "--features", s(&data), "--format", "xml", "--out", s(&root.join("bad"))]);
    assert_eq!(code(&bad), 1);
    assert!(!root.join("bad/sweep.csv").exists());

    // other subcommands run and write their outputs
    ok(bin(root, &["embed", "--checkpoint", s(&ckpt), "--features", s(&data), "--out", s(&root.join("emb"))]));
    let emb: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("emb/embeddings.json")).unwrap()).unwrap();
    assert_eq!(emb["videos"].as_array().unwrap().len(), 6);
    ok(bin(root, &["attention-report", "--checkpoint", s(&ckpt), "--features", s(&data), "--out", s(&root.join("att"))]));
    assert!(root.join("att/attention.csv").is_file());
    let picked = root.join("act/selected.csv");
    ok(bin(root, &["active-sample", "--checkpoint", s(&ckpt), "--centroids", s(&centroids), "--features", s(&data), "--keep-fraction", "0.5", "--out", s(&picked)]));
    assert!(fs::read_to_string(&picked).unwrap().lines().count() > 1);
    let c2 = root.join("c2/centroids.json");
    ok(bin(root, &["centroids", "--checkpoint", s(&ckpt), "--features", s(&data), "--split", "train", "--out", s(&c2)]));
    assert_eq!(fs::read_to_string(&c2).unwrap(), fs::read_to_string(&centroids).unwrap());
}

#[test]
fn score_with_missing_centroid_names_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (data, ckpt) = fixture(root);
    let mut c: serde_json::Value = serde_json::from_str(&fs::read_to_string(ckpt.join("centroids.json")).unwrap()).unwrap();
    c["classes"].as_array_mut().unwrap().retain(|e| e["label"] != "action01");
    let partial = root.join("partial.json");
    fs::write(&partial, serde_json::to_string(&c).unwrap()).unwrap();
    let out = root.join("s/scores.csv");
    let o = bin(root, &["score", "--checkpoint", s(&ckpt), "--centroids", s(&partial), "--features", s(&data), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("action01"));
    assert!(!out.exists());
}

#[test]
fn stats_on_crafted_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let ratings = root.join("ratings.csv");
    let mut text = String::from("rater_id,video_id,axis,score,is_duplicate_group\n");
    for r in 0..6 {
        for v in 0..12 {
            let score = 1.0 + 0.5 * v as f64 + if r % 2 == 0 { 0.5 } else { 0.0 };
            text.push_str(&format!("r{r},v{v},action,{score},\n"));
        }
    }
    fs::write(&ratings, text).unwrap();
    let meta = root.join("meta.csv");
    let mut m = String::from("video_id,model,prompt\n");
    for v in 0..12 {
        m.push_str(&format!("v{v},m{},p{}\n", 1 + v % 2, v / 2));
    }
    fs::write(&meta, m).unwrap();
    let out = root.join("stats");
    ok(bin(root, &["stats", "--ratings", s(&ratings), "--metadata", s(&meta), "--convergence", "v0,v3", "--out", s(&out)]));
    let mos = fs::read_to_string(out.join("mos.csv")).unwrap();
    // raters differ by a constant offset, so all six survive screening
    assert_eq!(mos.lines().count(), 13);
    assert!(mos.lines().nth(1).unwrap().starts_with("v0,1.25,"));
    let wins = fs::read_to_string(out.join("win_ratio.csv")).unwrap();
    assert!(wins.contains("mos,m2,1"));
    assert!(out.join("convergence.svg").is_file());
    let study: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    assert_eq!(study["after_interrater"].as_array().unwrap().len(), 6);
}
