use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxnoise"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const BASE: &str = r#"{
  "environment": {"temperature_mK": 10, "fields_gauss": [0, 100]},
  "rates": {"gamma0": 1, "gamma_tilde": 5e-6, "n": 4, "lambda_max": 30},
  "grid": {"x_min": 1e-6, "x_max": 1, "points_per_decade": 4}
}"#;

#[test]
fn spectrum_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    // 6 decades at 4 points each plus the endpoint, for two fields
    assert_eq!(text.lines().count(), 1 + 2 * 25);
}

#[test]
fn json_format_is_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let o = run(&[
        "spectrum",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("spectrum.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v.is_object());
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("\"n\": 4", "\"n\": 4, \"bogus\": 1"));
    let o = run(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let cfg = write_config(
        dir.path(),
        &BASE.replace("\"temperature_mK\": 10", "\"temperature_mK\": -1"),
    );
    assert_eq!(run(&["spectrum", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        run(&["spectrum", "--config", missing.to_str().unwrap()]).status.code(),
        Some(4)
    );

    let cfg = write_config(dir.path(), BASE);
    let o = run(&[
        "fit",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--input",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unreachable_quadrature_tolerance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = BASE.replace(
        "\"grid\"",
        "\"method\": {\"quadrature\": {\"tolerance\": 1e-300}},\n  \"grid\"",
    );
    let cfg = write_config(dir.path(), &body);
    let o = run(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let body = BASE.replace(
        "\"grid\"",
        "\"method\": {\"monte_carlo\": {\"samples\": 500, \"seed\": 1}},\n  \"grid\"",
    );
    let cfg = write_config(dir.path(), &body);
    let read = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        let o = run(&[
            "spectrum",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out.join("spectrum.csv")).unwrap()
    };
    assert_eq!(read("5"), read("5"));
    assert_ne!(read("5"), read("6"));
}
