use std::path::Path;
use std::process::{Command, Output};

fn s2k(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2k"))
        .args(args)
        .env_remove("S2K_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn magnified_harmonic_excitation_fails_in_config_stage() {
    let o = s2k(&["evaluate", "--benchmark", "quarter-car", "--sigma", "1.5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("config stage failed"), "{}", stderr(&o));
}

#[test]
fn generate_requires_an_output_directory() {
    let o = s2k(&["generate", "--benchmark", "duffing"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));
}

#[test]
fn unknown_benchmark_is_rejected_by_the_parser() {
    let o = s2k(&["generate", "--benchmark", "pendulum"]);
    assert!(!o.status.success());
}

#[test]
fn missing_model_fails_in_io_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let model = dir.path().join("absent.json");
    let o = s2k(&[
        "emulate",
        "--model",
        model.to_str().unwrap(),
        "--benchmark",
        "duffing",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(8), "{}", stderr(&o));
    assert!(stderr(&o).contains("io stage failed"));
}

#[test]
fn generate_then_replay_reproduces_histories() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let o = s2k(&[
        "generate",
        "--benchmark",
        "bouc-wen",
        "--n-train",
        "2",
        "--sigma",
        "mixture",
        "--duration",
        "1",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = first.join("manifest.json");
    let o = s2k(&["replay", "--manifest", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..2 {
        let name = format!("train/history_{k:03}.csv");
        let read = |d: &Path| std::fs::read(d.join(&name)).unwrap();
        assert_eq!(read(&first), read(&second), "{name}");
    }
}
