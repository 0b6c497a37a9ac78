//! Exit codes and messages of the `author2vec` binary on bad input.

use std::path::Path;
use std::process::{Command, Output};

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_author2vec"))
        .arg("--output")
        .arg(root)
        .args(["--threads", "1"])
        .args(["--set", "corpus.source=synthetic"])
        .args([
            "--set",
            "synth.authors=12",
            "--set",
            "synth.posts_per_author=40",
        ])
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_upstream_stage_is_exit_2_and_named() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["pretrain"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("ingest/manifest.json"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_corpus_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_author2vec"))
        .arg("--output")
        .arg(tmp.path())
        .args(["--set", "corpus.path=/nonexistent/posts.jsonl", "ingest"])
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("/nonexistent/posts.jsonl"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn bad_flags_and_keys_are_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["--threads", "0", "show-config"],
        vec!["--set", "no.such.key=1", "show-config"],
        vec!["--set", "model.hidden", "show-config"],
    ] {
        let o = Command::new(env!("CARGO_BIN_EXE_author2vec"))
            .arg("--output")
            .arg(tmp.path())
            .args(&args)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn tampered_upstream_is_stale_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    for stage in ["synth", "ingest"] {
        let o = run(tmp.path(), &[stage]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let stats: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("ingest/stats.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(stats["authors"], 12);

    let corpus = tmp.path().join("ingest/corpus.jsonl");
    let mut text = std::fs::read_to_string(&corpus).unwrap();
    text.push('\n');
    std::fs::write(&corpus, text).unwrap();
    let o = run(tmp.path(), &["baseline", "lsi"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("ingest/corpus.jsonl"), "{}", stderr(&o));
}

#[test]
fn show_config_reflects_seed_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["--seed", "42", "--set", "pretrain.epochs=3", "show-config"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let value: toml::Table = text.parse().unwrap();
    assert_eq!(value["seed"].as_integer(), Some(42));
    assert_eq!(value["pretrain"]["epochs"].as_integer(), Some(3));
    assert_eq!(value["pretrain"]["seed"].as_integer(), Some(42));
}
