use std::path::Path;
use std::process::{Command, Output};

fn clickchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickchain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small(out: &Path, args: &[&str]) -> Output {
    let mut all = vec![
        "--out",
        out.to_str().unwrap(),
        "--sessions",
        "200",
        "--eval-sessions",
        "80",
    ];
    all.extend_from_slice(args);
    clickchain(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(clickchain(&["--help"]).status.code(), Some(0));
    assert_eq!(clickchain(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_and_configuration_errors_exit_one() {
    assert_eq!(clickchain(&[]).status.code(), Some(1));
    assert_eq!(clickchain(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(clickchain(&["--epsilon", "2", "config"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    assert_eq!(
        clickchain(&["--config", cfg.to_str().unwrap(), "config"]).status.code(),
        Some(1)
    );
}

#[test]
fn missing_artifacts_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = small(dir.path(), &["chains"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn full_run_prints_a_report_and_stages_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = small(dir.path(), &["run"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("QC_vs_BASE") && text.contains("QC_vs_NC"), "{text}");
    let report = small(dir.path(), &["report"]);
    assert_eq!(report.status.code(), Some(0));
    assert_eq!(stdout(&report), text);
    let rerank = small(dir.path(), &["rerank", "--mode", "qc", "--query", "lexus", "-k", "3"]);
    assert_eq!(rerank.status.code(), Some(0));
    assert!(stdout(&rerank).lines().count() <= 3);
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["index"][..],
        &["simulate"],
        &["chains"],
        &["prefs", "--mode", "qc"],
        &["prefs", "--mode", "nc"],
        &["train", "--mode", "qc"],
        &["train", "--mode", "nc"],
        &["interleave"],
        &["report"],
    ] {
        let o = small(dir.path(), args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let base = small(dir.path(), &["rerank", "--mode", "base", "--query", "library hours"]);
    assert!(stdout(&base).lines().next().unwrap().starts_with("1\t"));
}

#[test]
fn fixture_and_config_commands_write_usable_files() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.jsonl");
    let intents = dir.path().join("intents.json");
    let o = clickchain(&[
        "fixture",
        "--docs",
        docs.to_str().unwrap(),
        "--intents-out",
        intents.to_str().unwrap(),
        "--background",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = clickchain(&[
        "--corpus",
        docs.to_str().unwrap(),
        "--intents",
        intents.to_str().unwrap(),
        "config",
    ]);
    assert_eq!(cfg.status.code(), Some(0));
    let toml_path = dir.path().join("exp.toml");
    std::fs::write(&toml_path, stdout(&cfg)).unwrap();
    let out = dir.path().join("art");
    let run = clickchain(&[
        "--config",
        toml_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--sessions",
        "100",
        "--eval-sessions",
        "30",
        "run",
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
}
