use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ldat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldat"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ldat(dir, args);
    assert!(
        out.status.success(),
        "ldat {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the parsed JSON error line.
fn failure(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = ldat(dir, args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap_or_default();
    let err: Value = serde_json::from_str(last).unwrap_or_else(|_| panic!("not JSON: {stderr}"));
    (out.status.code().unwrap(), err)
}

/// Two documents over four symbols with disjoint support.
fn disjoint_fixture(dir: &Path) {
    std::fs::write(
        dir.join("bags.jsonl"),
        "{\"id\":\"a\",\"counts\":[3,1,0,0],\"total\":4}\n{\"id\":\"b\",\"counts\":[0,0,2,2],\"total\":4}\n",
    )
    .unwrap();
    let half = 0.5f64.ln();
    let model = serde_json::json!({
        "K": 2,
        "V": 4,
        "alpha": 0.5,
        "log_beta": [[half, half, null, null], [null, null, half, half]],
    });
    std::fs::write(dir.join("lda.json"), model.to_string()).unwrap();
}

fn small_corpus(dir: &Path) {
    ok(
        dir,
        &["synth", "--docs", "20", "--frames-per-doc", "10", "--out-features", "f.jsonl", "--out-labels", "l.jsonl"],
    );
    ok(dir, &["train-gmm", "--features", "f.jsonl", "--components", "8", "--out", "gmm.json"]);
    ok(dir, &["quantize", "--gmm", "gmm.json", "--features", "f.jsonl", "--out-bags", "bags.jsonl"]);
}

#[test]
fn train_lda_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    let args = ["train-lda", "--bags", "bags.jsonl", "--k", "4", "--seed", "7", "--out"];
    ok(d, &[&args[..], &["lda4.json"]].concat());
    let first = std::fs::read(d.join("lda4.json")).unwrap();
    ok(d, &[&args[..], &["lda4.json"]].concat());
    assert_eq!(first, std::fs::read(d.join("lda4.json")).unwrap());
    ok(d, &[&args[..], &["other.json"]].concat());
    assert_eq!(first, std::fs::read(d.join("other.json")).unwrap());

    let model: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(model["meta"]["seed"], 7);
    assert_eq!(model["meta"]["stage"], "train-lda");
    assert_eq!(model["K"], 4);
}

#[test]
fn entropy_of_one_hot_posteriors_prints_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    disjoint_fixture(d);
    let out = ok(d, &["entropy", "--model", "lda.json", "--bags", "bags.jsonl", "--subtract-prior"]);
    assert_eq!(out, "0.0\n");

    ok(d, &["assign", "--model", "lda.json", "--bags", "bags.jsonl", "--subtract-prior", "--out", "a.jsonl"]);
    assert_eq!(ok(d, &["entropy", "--assignments", "a.jsonl"]), "0.0\n");

    // with the prior left in, theta keeps some mass on the other domain
    let h: f64 = ok(d, &["entropy", "--model", "lda.json", "--bags", "bags.jsonl"])
        .trim()
        .parse()
        .unwrap();
    assert!(h > 0.0 && h < 1.0);
}

#[test]
fn assignments_carry_meta_and_map_domains() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    disjoint_fixture(d);
    ok(d, &["assign", "--model", "lda.json", "--bags", "bags.jsonl", "--out", "a.jsonl"]);
    let text = std::fs::read_to_string(d.join("a.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["meta"]["stage"], "assign");
    assert_eq!(lines[1]["id"], "a");
    assert_eq!(lines[1]["map_domain"], 0);
    assert_eq!(lines[2]["map_domain"], 1);
    assert_eq!(lines[2]["weight"], 4.0);
}

#[test]
fn usage_errors_exit_2_with_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, err) = failure(d, &["train-lda", "--bags", "bags.jsonl", "--out", "x.json"]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("--k"));

    let (code, err) = failure(d, &["no-such-command"]);
    assert_eq!(code, 2);
    assert_eq!(err["error"], "usage");

    let (code, _) = failure(d, &["train-lda", "--bags", "b.jsonl", "--k", "0", "--out", "x.json"]);
    assert_eq!(code, 2);
    let (code, _) = failure(d, &["--threads", "0", "entropy", "--assignments", "a.jsonl"]);
    assert_eq!(code, 2);
    let (code, _) = failure(
        d,
        &["filter", "--assign-a", "a", "--assign-b", "b", "--out", "o", "--target-frac", "1.5"],
    );
    assert_eq!(code, 2);
}

#[test]
fn data_errors_exit_1_with_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, err) = failure(d, &["train-lda", "--bags", "missing.jsonl", "--k", "2", "--out", "x.json"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "io");

    std::fs::write(d.join("bad.jsonl"), "{\"id\":\"a\",\"counts\":[1],\"total\":1}\nnot json\n").unwrap();
    let (code, err) = failure(d, &["train-lda", "--bags", "bad.jsonl", "--k", "2", "--out", "x.json"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("bad.jsonl"));
    assert!(!d.join("x.json").exists());

    disjoint_fixture(d);
    std::fs::write(d.join("wide.jsonl"), "{\"id\":\"w\",\"counts\":[1,1,1,1,1],\"total\":5}\n").unwrap();
    let (code, err) = failure(d, &["assign", "--model", "lda.json", "--bags", "wide.jsonl", "--out", "a.jsonl"]);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "dimension_mismatch");
}

#[test]
fn a_stage_never_overwrites_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    disjoint_fixture(d);
    let before = std::fs::read(d.join("bags.jsonl")).unwrap();
    let (code, err) = failure(d, &["train-lda", "--bags", "bags.jsonl", "--k", "2", "--out", "./bags.jsonl"]);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("also an input"));
    assert_eq!(before, std::fs::read(d.join("bags.jsonl")).unwrap());
}

#[test]
fn flags_override_manifest_and_manifest_paths_are_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir(d.join("run")).unwrap();
    disjoint_fixture(&d.join("run"));
    std::fs::write(
        d.join("run/m.toml"),
        "seed = 5\n[train-lda]\nbags = \"bags.jsonl\"\nk = 3\nmax-em-iters = 2\nout = \"lda3.json\"\n",
    )
    .unwrap();
    ok(d, &["--manifest", "run/m.toml", "train-lda"]);
    let m: Value = serde_json::from_slice(&std::fs::read(d.join("run/lda3.json")).unwrap()).unwrap();
    assert_eq!(m["K"], 3);
    assert_eq!(m["meta"]["seed"], 5);

    ok(d, &["--manifest", "run/m.toml", "--seed", "9", "train-lda", "--k", "2", "--out", "lda2.json"]);
    let m: Value = serde_json::from_slice(&std::fs::read(d.join("lda2.json")).unwrap()).unwrap();
    assert_eq!(m["K"], 2);
    assert_eq!(m["meta"]["seed"], 9);
}

#[test]
fn help_lists_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for stage in [
        "train-gmm", "quantize", "train-lda", "assign", "entropy", "filter", "augment-train", "eval",
        "stats",
    ] {
        assert!(help.contains(stage), "{stage} missing from --help");
    }
}

#[test]
fn training_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    ok(d, &["train-lda", "--bags", "bags.jsonl", "--k", "2", "--out", "lda.json"]);
    ok(d, &["assign", "--model", "lda.json", "--bags", "bags.jsonl", "--out", "a.jsonl"]);
    let common = ["--features", "f.jsonl", "--labels", "l.jsonl", "--hidden", "8", "--epochs", "2"];
    ok(d, &[&["augment-train"][..], &common, &["--out", "base.json", "--metrics", "m.csv"]].concat());
    ok(
        d,
        &[
            &["augment-train"][..],
            &common,
            &["--assignments", "a.jsonl", "--init-from", "base.json", "--out", "aug.json"],
        ]
        .concat(),
    );
    let metrics = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let mut lines = metrics.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,cv_accuracy,cv_loss,learning_rate");
    assert_eq!(lines.count(), 2);

    let report: Value = serde_json::from_str(
        &ok(d, &["eval", "--model", "aug.json", "--features", "f.jsonl", "--labels", "l.jsonl", "--assignments", "a.jsonl"]),
    )
    .unwrap();
    assert_eq!(report["frames"], 200);
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    // a domain-aware network cannot be evaluated without domain inputs
    let (code, _) = failure(d, &["eval", "--model", "aug.json", "--features", "f.jsonl", "--labels", "l.jsonl"]);
    assert_eq!(code, 2);
}

#[test]
fn stats_table_has_top_n_plus_other() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpus(d);
    ok(d, &["train-lda", "--bags", "bags.jsonl", "--k", "4", "--out", "lda.json"]);
    ok(d, &["assign", "--model", "lda.json", "--bags", "bags.jsonl", "--out", "a.jsonl"]);
    ok(d, &["stats", "--assignments", "a.jsonl", "--top-n", "2", "--out", "s.csv"]);
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("all,")));
    assert!(rows[2].starts_with("all,other,"));
    let total: f64 = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert_eq!(total, 200.0);
}
