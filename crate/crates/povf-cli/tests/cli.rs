//! End-to-end checks of the `povf` binary: flag parsing, exit codes, and
//! artifact reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn povf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povf"))
        .args(args)
        .output()
        .expect("spawn povf")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn selftest_passes_and_names_cases() {
    let output = povf(&["selftest"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("vdf-example-2: PASS"));
    assert!(text.contains("gini-examples: PASS"));
    // deterministic output across invocations
    assert_eq!(text, stdout(&povf(&["selftest"])));
}

#[test]
fn vdf_eval_prints_worked_example() {
    let output = povf(&["vdf", "eval", "--n", "101", "--l", "41", "--x", "2", "--t", "10"]);
    assert!(output.status.success());
    assert_eq!(stdout(&output).trim(), "y=5 pi=5");
}

#[test]
fn vdf_eval_accepts_hex_flags() {
    let output = povf(&["vdf", "eval", "--n", "0x65", "--l", "0x29", "--x", "0x2", "--t", "10"]);
    assert!(output.status.success());
    assert_eq!(stdout(&output).trim(), "y=5 pi=5");
}

#[test]
fn vdf_verify_exit_codes() {
    let good = povf(&[
        "vdf", "verify", "--n", "101", "--l", "41", "--x", "2", "--y", "5", "--pi", "5", "--t",
        "10",
    ]);
    assert_eq!(good.status.code(), Some(0));
    assert_eq!(stdout(&good).trim(), "true");

    let bad = povf(&[
        "vdf", "verify", "--n", "101", "--l", "41", "--x", "2", "--y", "6", "--pi", "5", "--t",
        "10",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stdout(&bad).trim(), "false");
}

#[test]
fn malformed_numerics_exit_2() {
    let output = povf(&["vdf", "eval", "--n", "not-a-number", "--l", "41", "--x", "2", "--t", "10"]);
    assert_eq!(output.status.code(), Some(2));
    // missing required flags are also usage errors
    let output = povf(&["vdf", "eval", "--n", "101"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn vdf_bench_small_sweep_runs() {
    let output = povf(&["vdf", "bench", "--bits", "64", "--t", "2000"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout(&output).contains("eval time ratio 10T/T"));
}

fn smoke_config(dir: &Path, seed: u64) -> std::path::PathBuf {
    let path = dir.join("smoke.toml");
    fs::write(
        &path,
        format!(
            r#"
node_count = 6
omega = 3
duration_epochs = 10
epoch_ms = 1000
vdf_rounds = 64
heartbeat_rounds = 64
t_max_ms = 4000
delay_height = 2
tx_rate_per_s = 15.0
vrf_key_bits = 128
rng_seed = {seed}
"#
        ),
    )
    .unwrap();
    path
}

/// Every artifact except the manifest (which records wall times) must be
/// bytewise identical across reruns of the same config and seed.
#[test]
fn sim_artifacts_reproduce_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config(dir.path(), 99);
    for run in ["a", "b"] {
        let out = povf(&[
            "sim",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join(run).to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut compared = 0;
    for entry in fs::read_dir(dir.path().join("a")).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        if name == "manifest.json" || entry.path().is_dir() {
            continue;
        }
        let a = fs::read(entry.path()).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "artifact {name:?} differs between identical runs");
        compared += 1;
    }
    assert!(compared >= 7, "only {compared} artifacts compared");
    // per-node block logs too
    for entry in fs::read_dir(dir.path().join("a/blocks")).unwrap() {
        let entry = entry.unwrap();
        let a = fs::read(entry.path()).unwrap();
        let b = fs::read(dir.path().join("b/blocks").join(entry.file_name())).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config(dir.path(), 99);
    let out = povf(&[
        "sim",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "123",
        "--out",
        dir.path().join("r").to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("seed: 123"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rng_seed"], 123);
}

#[test]
fn invalid_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "node_count = 4\nomega = 0\n").unwrap();
    let out = povf(&[
        "sim",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega"));
}

#[test]
fn report_from_counts_file() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.txt");
    fs::write(&counts, "0 0 0 4").unwrap();
    let out = povf(&["report", "--counts-file", counts.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["gini"], "0.75");

    fs::write(&counts, "5 5 5").unwrap();
    let out = povf(&["report", "--counts-file", counts.to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["gini"], "0");
    assert_eq!(doc["std_dev"], 0.0);

    fs::write(&counts, "1 two 3").unwrap();
    let out = povf(&["report", "--counts-file", counts.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_of_a_run_matches_its_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = smoke_config(dir.path(), 4711);
    let run_dir = dir.path().join("r");
    let out = povf(&[
        "sim",
        "--config",
        config.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    let out = povf(&["report", "--trace-dir", run_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let recomputed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(run_dir.join("summary.json")).unwrap()).unwrap();
    let metrics = &summary["metrics"];
    assert_eq!(recomputed["average_tps"], metrics["average_tps"]);
    assert_eq!(
        recomputed["max_instantaneous_tps"],
        metrics["max_instantaneous_tps"]
    );
    assert_eq!(recomputed["gini"], metrics["gini"]);
    assert_eq!(recomputed["std_dev"], metrics["std_dev"]);
    assert_eq!(
        recomputed["confirmed_heights"],
        metrics["confirmed_heights"]
    );
}

#[test]
fn report_rejects_missing_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = povf(&["report", "--trace-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
