use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aespace::encoder::EncoderParams;
use aespace::trainer::{train, TrainConfig};
use aespace::Dataset;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_aespace"));
    c.env_remove("AESPACE_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

/// Model whose embedding is its input, so the projection score is the feature norm.
fn identity_model(dir: &Path, d: usize) -> PathBuf {
    let mut w = vec![0.0; d * d];
    for i in 0..d {
        w[i * d + i] = 1.0;
    }
    let p = EncoderParams::from_parts(vec![d, d], vec![w], vec![vec![0.0; d]]).unwrap();
    let path = dir.join("identity.json");
    p.save(&path).unwrap();
    path
}

#[test]
fn synth_writes_requested_records_and_metadata() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "synth", "--n", "10", "--din", "4", "--seed", "1", "--out", "d.jsonl",
        ],
    );
    assert_eq!(read(t.path(), "d.jsonl").lines().count(), 10);
    let meta: serde_json::Value =
        serde_json::from_str(&read(t.path(), "d.jsonl.run.json")).unwrap();
    assert_eq!(meta["subcommand"], "synth");
    assert_eq!(meta["config"]["n"], 10);
    assert!(t.path().join("d.jsonl.synth.json").exists());
}

#[test]
fn missing_required_flag_is_usage_error() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), &["synth", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    let t = TempDir::new().unwrap();
    for args in [
        &["synth", "--n", "10", "--noise", "-1", "--out", "x"][..],
        &["synth", "--n", "0", "--out", "x"],
        &["synth", "--n", "ten", "--out", "x"],
    ] {
        assert_eq!(run(t.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn help_lists_defaults() {
    let out = bin().args(["train", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for d in [
        "[default: 0.2]",
        "[default: 0.1]",
        "[default: 64,32]",
        "[default: 30000]",
        "AESPACE_SEED",
    ] {
        assert!(text.contains(d), "missing {d}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "synth", "--n", "5", "--din", "2", "--seed", "42", "--out", "a.jsonl",
        ],
    );
    let out = bin()
        .current_dir(t.path())
        .env("AESPACE_SEED", "42")
        .args(["synth", "--n", "5", "--din", "2", "--out", "b.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(t.path(), "a.jsonl"), read(t.path(), "b.jsonl"));
    ok(
        t.path(),
        &["synth", "--n", "5", "--din", "2", "--out", "c.jsonl"],
    );
    assert_ne!(read(t.path(), "a.jsonl"), read(t.path(), "c.jsonl"));
}

#[test]
fn score_examples_round_trip() {
    let t = TempDir::new().unwrap();
    let lines = [
        r#"{"id":"a","views":1000,"faves":10,"features":[0.0]}"#,
        r#"{"id":"b","views":77,"faves":77,"features":[0.0]}"#,
        r#"{"id":"c","views":500,"faves":1,"features":[0.0]}"#,
        r#"{"id":"bad","views":1,"faves":1,"features":[0.0]}"#,
    ];
    fs::write(t.path().join("in.jsonl"), lines.join("\n") + "\n").unwrap();
    let out = run(
        t.path(),
        &[
            "score",
            "--input",
            "in.jsonl",
            "--out",
            "s.csv",
            "--hist-out",
            "h.csv",
            "--bins",
            "4",
        ],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(":4: rejected"));
    let rows = csv_rows(&read(t.path(), "s.csv"));
    assert_eq!(rows.len(), 3);
    let v: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((v[0] - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v[1], 1.0);
    assert_eq!(v[2], 0.0);
    let hist = read(t.path(), "h.csv");
    assert!(hist.starts_with("bin_lo,bin_hi,count\n"));
    let counts: Vec<u64> = csv_rows(&hist)
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(counts, vec![1, 1, 0, 1]);
}

#[test]
fn sample_writes_triplets_and_acceptance_rate() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["synth", "--n", "50", "--din", "2", "--out", "d.jsonl"],
    );
    ok(
        t.path(),
        &[
            "sample", "--input", "d.jsonl", "--count", "20", "--seed", "3", "--out", "t.csv",
        ],
    );
    let text = read(t.path(), "t.csv");
    assert!(text.starts_with("a,p,n,pair_above,ratio\n"));
    for r in csv_rows(&text) {
        let ratio: f64 = r[4].parse().unwrap();
        assert!(ratio > 0.25 && ratio < 0.75);
    }
    let meta: serde_json::Value = serde_json::from_str(&read(t.path(), "t.csv.run.json")).unwrap();
    assert_eq!(meta["results"]["accepted"], 20);
    let rate = meta["results"]["acceptance_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate <= 1.0);
    assert_eq!(meta["config"]["sampler"]["pair_ref"], "mean");
}

#[test]
fn sampler_starvation_is_runtime_error() {
    let t = TempDir::new().unwrap();
    let line = |i: usize| format!(r#"{{"id":"x{i}","views":100,"faves":10,"features":[0.0]}}"#);
    fs::write(
        t.path().join("flat.jsonl"),
        (0..5).map(line).collect::<Vec<_>>().join("\n"),
    )
    .unwrap();
    let out = run(
        t.path(),
        &[
            "sample",
            "--input",
            "flat.jsonl",
            "--budget",
            "1000",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn missing_input_is_runtime_error() {
    let t = TempDir::new().unwrap();
    let out = run(
        t.path(),
        &["score", "--input", "nope.jsonl", "--out", "s.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_steps_returns_initial_model() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["synth", "--n", "30", "--din", "3", "--out", "d.jsonl"],
    );
    ok(
        t.path(),
        &[
            "train",
            "--input",
            "d.jsonl",
            "--steps",
            "0",
            "--hidden",
            "5",
            "--embed-dim",
            "4",
            "--seed",
            "11",
            "--model-out",
            "m.json",
            "--log-out",
            "l.csv",
        ],
    );
    let init = EncoderParams::init(&[3, 5, 4], aespace::rng::derive_seed(11, 1)).unwrap();
    assert_eq!(read(t.path(), "m.json"), init.to_json());
}

#[test]
fn train_matches_library_and_recorded_baseline() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "synth", "--n", "300", "--din", "4", "--seed", "3", "--out", "d.jsonl",
        ],
    );
    ok(
        t.path(),
        &[
            "train",
            "--input",
            "d.jsonl",
            "--steps",
            "2000",
            "--seed",
            "3",
            "--model-out",
            "m.json",
            "--log-out",
            "l.csv",
        ],
    );
    let log = read(t.path(), "l.csv");
    assert!(log.starts_with("step,mean_loss,mean_le,mean_ld,lr,acceptance_rate\n"));
    let rows = csv_rows(&log);
    let steps: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(steps, vec![500, 1000, 1500, 2000]);
    let final_loss: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert!(
        (final_loss - 0.07757351120421412).abs() < 1e-12,
        "{final_loss}"
    );

    let ds = Dataset::load(t.path().join("d.jsonl")).unwrap().dataset;
    let cfg = TrainConfig {
        max_steps: 2000,
        seed: 3,
        ..Default::default()
    };
    let (params, _) = train(&ds, &cfg).unwrap();
    assert_eq!(read(t.path(), "m.json"), params.to_json());
    let meta: serde_json::Value = serde_json::from_str(&read(t.path(), "m.json.run.json")).unwrap();
    assert_eq!(meta["config"]["max_steps"], 2000);
    assert_eq!(meta["results"]["steps_run"], 2000);
}

#[test]
fn no_directional_log_has_zero_directional_term() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["synth", "--n", "100", "--din", "3", "--out", "d.jsonl"],
    );
    ok(
        t.path(),
        &[
            "train",
            "--input",
            "d.jsonl",
            "--steps",
            "1200",
            "--no-directional",
            "--model-out",
            "m.json",
            "--log-out",
            "l.csv",
        ],
    );
    let rows = csv_rows(&read(t.path(), "l.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn literal_sign_and_anchor_flags_reach_config() {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &["synth", "--n", "50", "--din", "3", "--out", "d.jsonl"],
    );
    ok(
        t.path(),
        &[
            "train",
            "--input",
            "d.jsonl",
            "--steps",
            "10",
            "--literal-sign",
            "--pair-ref",
            "anchor",
            "--hidden",
            "",
            "--margin",
            "0.5",
            "--dir-margin",
            "0.3",
            "--alpha",
            "0.1",
            "--beta",
            "0.9",
            "--lr",
            "0.01",
            "--batch",
            "8",
            "--model-out",
            "m.json",
            "--log-out",
            "l.csv",
        ],
    );
    let meta: serde_json::Value = serde_json::from_str(&read(t.path(), "m.json.run.json")).unwrap();
    let c = &meta["config"];
    assert_eq!(c["loss"]["literal_sign_form"], true);
    assert_eq!(c["loss"]["margin_m"], 0.5);
    assert_eq!(c["loss"]["margin_md"], 0.3);
    assert_eq!(c["sampler"]["pair_ref"], "anchor");
    assert_eq!(c["sampler"]["alpha"], 0.1);
    assert_eq!(c["hidden"], serde_json::json!([]));
    assert_eq!(c["batch_size"], 8);
    let m = EncoderParams::load(t.path().join("m.json")).unwrap();
    assert_eq!(m.layer_dims(), &[3, 16]);
}

fn norm_fixture(dir: &Path) {
    let lines = [
        r#"{"id":"small","views":100,"faves":2,"features":[0.1,0.0]}"#,
        r#"{"id":"big","views":100,"faves":90,"features":[3.0,4.0]}"#,
        r#"{"id":"mid","views":100,"faves":20,"features":[0.0,-2.0]}"#,
        r#"{"id":"tie","views":100,"faves":30,"features":[2.0,0.0]}"#,
    ];
    fs::write(dir.join("c.jsonl"), lines.join("\n")).unwrap();
}

#[test]
fn rank_orders_by_norm_with_id_tiebreak() {
    let t = TempDir::new().unwrap();
    identity_model(t.path(), 2);
    norm_fixture(t.path());
    ok(
        t.path(),
        &[
            "rank",
            "--model",
            "identity.json",
            "--input",
            "c.jsonl",
            "--out",
            "r.csv",
        ],
    );
    assert_eq!(
        read(t.path(), "r.csv"),
        "rank,id,score\n1,big,5\n2,mid,2\n3,tie,2\n4,small,0.1\n"
    );
}

#[test]
fn embed_writes_embeddings_and_norms() {
    let t = TempDir::new().unwrap();
    identity_model(t.path(), 2);
    norm_fixture(t.path());
    ok(
        t.path(),
        &[
            "embed",
            "--model",
            "identity.json",
            "--input",
            "c.jsonl",
            "--out",
            "e.jsonl",
        ],
    );
    let first: serde_json::Value =
        serde_json::from_str(read(t.path(), "e.jsonl").lines().nth(1).unwrap()).unwrap();
    assert_eq!(first["id"], "big");
    assert_eq!(first["score"], 5.0);
    assert_eq!(first["embedding"], serde_json::json!([3.0, 4.0]));
}

#[test]
fn eval_counts_pairs_and_treats_ties_as_disagreement() {
    let t = TempDir::new().unwrap();
    identity_model(t.path(), 2);
    norm_fixture(t.path());
    ok(
        t.path(),
        &[
            "eval",
            "--model",
            "identity.json",
            "--input",
            "c.jsonl",
            "--thresholds",
            "0.05,0.6,0.99",
            "--out",
            "a.csv",
        ],
    );
    // Scores: small 0.151, mid 0.651, tie 0.739, big 0.977. Norms of mid and tie are equal.
    let text = read(t.path(), "a.csv");
    assert_eq!(
        text,
        "delta,pairs,agreement\n0.05,6,0.8333333333333334\n0.6,1,1\n0.99,0,NA\n"
    );
    let out = run(
        t.path(),
        &[
            "eval",
            "--model",
            "identity.json",
            "--input",
            "c.jsonl",
            "--thresholds",
            "0.5,0.2",
            "--out",
            "a.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        t.path(),
        &[
            "eval",
            "--model",
            "identity.json",
            "--input",
            "c.jsonl",
            "--truth",
            "latent",
            "--out",
            "a.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn video_finds_peaks_of_trusted_measurements() {
    let t = TempDir::new().unwrap();
    identity_model(t.path(), 1);
    let frames: Vec<String> = [0.0, 1.0, 0.0, 2.0, 0.0]
        .iter()
        .enumerate()
        .map(|(i, x)| format!(r#"{{"id":"f{i}","features":[{x}]}}"#))
        .collect();
    fs::write(t.path().join("f.jsonl"), frames.join("\n")).unwrap();
    ok(
        t.path(),
        &[
            "video",
            "--model",
            "identity.json",
            "--frames",
            "f.jsonl",
            "--r",
            "1e-12",
            "--out",
            "v.csv",
        ],
    );
    let rows = csv_rows(&read(t.path(), "v.csv"));
    let peaks: Vec<usize> = rows
        .iter()
        .filter(|r| r[3] == "true")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert_eq!(peaks, vec![1, 3]);
    for (r, raw) in rows.iter().zip([0.0, 1.0, 0.0, 2.0, 0.0]) {
        assert_eq!(r[1].parse::<f64>().unwrap(), raw);
        assert!((r[2].parse::<f64>().unwrap() - raw).abs() < 1e-6);
    }
    ok(
        t.path(),
        &[
            "video",
            "--model",
            "identity.json",
            "--frames",
            "f.jsonl",
            "--r",
            "1e-12",
            "--min-sep",
            "3",
            "--out",
            "v2.csv",
        ],
    );
    let rows = csv_rows(&read(t.path(), "v2.csv"));
    let peaks: Vec<&str> = rows
        .iter()
        .filter(|r| r[3] == "true")
        .map(|r| r[0].as_str())
        .collect();
    assert_eq!(peaks, vec!["3"]);
}
