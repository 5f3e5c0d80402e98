//! CLI contract checks: exit codes, scriptability, and reproducible logs.

use std::path::Path;
use std::process::Command;

fn roe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roe"))
}

#[test]
fn list_scenarios_succeeds_and_prints_all_five() {
    let out = roe().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "health_gathering",
        "health_gathering_supreme",
        "my_way_home",
        "deadly_corridor",
        "deathmatch",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = roe().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configuration_exits_with_usage_code() {
    let out = roe()
        .args(["train", "--scenario", "not_a_scenario"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = roe()
        .args(["eval", "--run", "/nonexistent-run-dir"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1)); // missing file: runtime failure
}

#[test]
fn train_eval_trace_roundtrip_and_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let status = roe()
            .args([
                "train",
                "--scenario",
                "health_gathering",
                "--mode",
                "roe",
                "--seed",
                "9",
                "--steps",
                "320",
                "--workers",
                "2",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);
    for log in ["logs/diagnostics.csv", "logs/events.csv"] {
        assert_eq!(
            std::fs::read(a.join(log)).unwrap(),
            std::fs::read(b.join(log)).unwrap(),
            "{log} differs between identical invocations"
        );
    }

    let out = roe()
        .args(["eval", "--run"])
        .arg(&a)
        .args(["--checkpoint", "final", "--episodes", "5", "--seed", "1", "--json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["episodes"], 5);
    assert!(a.join("eval/report.json").exists());
    assert!(a.join("eval/heatmap.csv").exists());
    assert!(a.join("eval/heatmap.pgm").exists());

    let out = roe()
        .args(["trace", "--run"])
        .arg(&a)
        .args(["--event", "movement"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("step,movement"));
    assert_eq!(text.lines().count(), 1 + 320 / (2 * 20));

    let out = roe()
        .args(["trace", "--run"])
        .arg(&a)
        .args(["--event", "kill_any"]) // not in this scenario's taxonomy
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
