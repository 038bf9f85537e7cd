use std::path::Path;
use std::process::{Command, Output};

fn lamesolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamesolve")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn lists_all_experiments() {
    let o = lamesolve(&["--list", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 10);
    assert!(names.contains(&"l1-maxreg") && names.contains(&"volevich-crosscheck"));
    let o = lamesolve(&["--list", "--json", "--module", "halfspace"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&lamesolve(&["--experiment", "no-such-thing", "--out", out])), 5);
    assert_eq!(code(&lamesolve(&["--bogus-flag"])), 3);
    assert_eq!(code(&lamesolve(&[])), 3);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[besov]\ns = 0.9\n").unwrap();
    assert_eq!(code(&lamesolve(&["--config", cfg.to_str().unwrap(), "--experiment", "stokes-coupled", "--out", out])), 3);
    std::fs::write(&cfg, "[material]\nalpha = -1.0\n").unwrap();
    assert_eq!(code(&lamesolve(&["--config", cfg.to_str().unwrap(), "--experiment", "stokes-coupled", "--out", out])), 3);
    std::fs::write(&cfg, "not toml at all [").unwrap();
    assert_eq!(code(&lamesolve(&["--config", cfg.to_str().unwrap(), "--experiment", "stokes-coupled", "--out", out])), 3);

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&lamesolve(&["--config", missing.to_str().unwrap(), "--experiment", "stokes-coupled"])), 4);
    // a regular file where the output directory should go
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(code(&lamesolve(&["--experiment", "stokes-coupled", "--out", blocker.to_str().unwrap()])), 4);
}

fn run_json(experiment: &str, out: &Path) -> serde_json::Value {
    let o = lamesolve(&["--experiment", experiment, "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn manifest_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = run_json("stokes-coupled", a.path());
    assert_eq!(m["passed"], true);
    assert_eq!(m["config"]["seed"], 7);
    // every check appears exactly once with a verdict
    let names: Vec<&str> = m["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    run_json("stokes-coupled", b.path());
    for f in m["files"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        let x = std::fs::read(a.path().join("stokes-coupled").join(f)).unwrap();
        let y = std::fs::read(b.path().join("stokes-coupled").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
}

#[test]
fn seed_changes_samples() {
    let a = tempfile::tempdir().unwrap();
    let o = lamesolve(&["--experiment", "volevich-crosscheck", "--seed", "11", "--out", a.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("PASS halfspace.volevich"));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("volevich-crosscheck/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 11);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "volevich_u0_boundary.bin"));
}
