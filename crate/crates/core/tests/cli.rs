use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const QUARTIC: &str = r#"
seed = 5

[family]
kind = "quartic_sum_form"
dim = 1

[check]
conditions = ["A0", "B3w"]

[check.structure]
per_dim = 3

[check.probes]
pairs = 10

[scan.probes]
pairs = 4

[equilibrium]
market_size = 30
synthetic_buyers = 60
"#;

fn hedonic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedonic")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn failing_condition_exits_with_one_and_repeats_exactly() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUARTIC);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = hedonic(&["check", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read(&a, "report.jsonl"), read(&b, "report.jsonl"));
    let meta: serde_json::Value = serde_json::from_str(&read(&a, "metadata.json")).unwrap();
    assert!(meta["elapsed_seconds"].is_number());
}

#[test]
fn seed_flag_changes_the_probes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUARTIC);
    let a = hedonic(&["mtw-scan", "--config", &cfg]);
    let b = hedonic(&["mtw-scan", "--config", &cfg, "--seed", "6"]);
    assert_eq!(a.status.code(), Some(1));
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[family]\nkind = \"quadratic\"\ndim = 1\nwidth = 2\n");
    let o = hedonic(&["check", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_is_a_config_error() {
    assert_eq!(hedonic(&["check"]).status.code(), Some(3));
}

#[test]
fn table_format_writes_headed_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUARTIC);
    let out = tmp.path().join("t");
    let o = hedonic(&["equilibrium", "--config", &cfg, "--format", "table", "--threads", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let buyers = read(&out, "buyers.tsv");
    assert!(buyers.starts_with("index\tx\ty\tz\tmin_sv"));
    assert_eq!(buyers.lines().count(), 61);
    assert!(read(&out, "summary.tsv").contains("check:dual_certificate\tPASS"));
    assert!(read(&out, "histogram.tsv").starts_with("log10_min_sv_lo"));
}

#[test]
fn witness_replays_from_a_report_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUARTIC);
    let out = tmp.path().join("r");
    hedonic(&["check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let line = read(&out, "report.jsonl")
        .lines()
        .find(|l| l.contains("\"condition\":\"B3w\"") && l.contains("\"record\":\"condition\""))
        .unwrap()
        .to_string();
    let w = tmp.path().join("w.json");
    std::fs::write(&w, line).unwrap();
    let o = hedonic(&["replay-witness", "--config", &cfg, "--witness", w.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stdout).lines().last().unwrap()).unwrap();
    assert_eq!(rec["record"], "replay");
    assert_eq!(rec["reproduced"], true);
}

#[test]
fn replay_without_witness_flag_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUARTIC);
    assert_eq!(hedonic(&["replay-witness", "--config", &cfg]).status.code(), Some(3));
}
