//! Behavioral contract of the `delay-split` binary: exit codes by failure
//! class, gate diagnostics on stderr, and the scenario listing.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delay-split"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("missing file", dir.path().join("absent.toml"), None),
        (
            "unknown scenario",
            dir.path().join("unknown.toml"),
            Some("[scenario]\nname = \"does-not-exist\"\n"),
        ),
        (
            "parse error",
            dir.path().join("broken.toml"),
            Some("[scenario\nname = 3"),
        ),
        (
            "misaligned step",
            dir.path().join("misaligned.toml"),
            Some("[scenario]\nname = \"heat-point-delay\"\n[study]\nh = [0.3]\n"),
        ),
    ];
    for (label, path, text) in cases {
        if let Some(t) = text {
            write(&path, t);
        }
        let out = bin()
            .arg("run")
            .arg(&path)
            .arg("--out-dir")
            .arg(dir.path().join("out"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2), "{label}");
        assert!(!out.stderr.is_empty(), "{label}: expected a diagnostic");
    }
}

#[test]
fn fabricated_failing_gate_exits_with_code_1_and_names_the_gate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    // A first-order scheme cannot satisfy a second-order gate window.
    write(
        &config,
        "[scenario]\nname = \"scalar-dde\"\n\n[study]\nh = [0.1, 0.05, 0.025, 0.0125]\nschemes = [\"sequential\"]\n\n[gates]\norder_min = 1.9\norder_max = 2.1\n",
    );
    let out = bin()
        .arg("run")
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .arg("--quiet")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("order-window:sequential"),
        "diagnostic must name the failing gate, got: {stderr}"
    );
}

#[test]
fn list_scenarios_shows_builtins_and_config_customs() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let builtin_count = stdout.lines().count();
    assert_eq!(builtin_count, 5);
    for id in ["heat-point-delay", "intro-nonlinear", "scalar-dde", "no-delay", "pure-delay"] {
        assert!(stdout.lines().any(|l| l.starts_with(id)), "missing {id}");
    }

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    write(
        &config,
        r#"
[scenario]
name = "my-decay"

[[scenarios]]
id = "my-decay"
description = "diagonal decay with a point delay"
generator = { type = "diagonal", eigs = [-1.0] }
kernel = { atoms = [{ sigma = -1.0, weight = 0.25 }] }
head = { type = "constant", value = 1.0 }
history = { type = "frozen-head" }
m = 80
p = 2.0
t_final = 1.0
"#,
    );
    let out = bin().arg("list-scenarios").arg(&config).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 6);
    assert!(stdout.lines().any(|l| l.starts_with("my-decay")));
}

#[test]
fn probe_subcommand_writes_probe_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    write(
        &config,
        "[scenario]\nname = \"scalar-dde\"\n\n[study]\nh = [0.1, 0.05]\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("probe")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("probe.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "scalar-dde");
    assert!(json["contraction"]["max_ratio"].as_f64().unwrap() <= 1.0 + 1e-8);
}
