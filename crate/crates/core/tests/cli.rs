use std::path::Path;
use std::process::{Command, Output};

fn pmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmsim")).args(args).output().expect("spawn pmsim")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{"experiment": {"kind": "ber", "snr_db": [0, 5, 10], "trials": 4000, "frame": 500},
            "scheme": {"kind": "gsm", "m": 4, "p": 2, "n": 2}}"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (out, workers) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let o = pmsim(&["--config", &cfg, "--seed", "7", "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    assert_eq!(a, std::fs::read(c).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("snr_db,metric,value,std_error,trials,errors,wall_seconds"));
    assert_eq!(lines.count(), 3);
    assert!(!text.contains('\r'));
}

#[test]
fn seed_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = |seed: &str| pmsim(&["--config", &cfg, "--seed", seed]).stdout;
    assert_ne!(run("1"), run("2"));
}

#[test]
fn validate_only_does_not_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("never.csv");
    let o = pmsim(&["--config", &cfg, "--validate-only", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_two() {
    let o = pmsim(&["--config", "/nonexistent/pmsim.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/pmsim.json"));
    assert_eq!(pmsim(&["--bogus"]).status.code(), Some(2));
    assert_eq!(pmsim(&[]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"experiment": {"kind": "ber", "snr_db": [0]}, "scheme": {"kind": "sim", "m": 4, "p": 1}}"#).unwrap();
    let o = pmsim(&["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&bad, r#"{"experiment": {"kind": "ber", "snr_db": [0], "trials": "many"}, "scheme": {"kind": "sm", "m": 2}}"#).unwrap();
    let o = pmsim(&["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.trials"));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = pmsim(&["--config", &cfg, "--out", "/nonexistent-dir/out.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lists_every_scheme() {
    let o = pmsim(&["--list-schemes"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for k in pmsim::schemes::SchemeKind::ALL {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(k.name())), "{}", k.name());
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = pmsim(&["--config", path.to_str().unwrap(), "--validate-only"]);
            assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
