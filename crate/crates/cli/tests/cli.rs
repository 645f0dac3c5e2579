use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsenet"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const E1: &str = r#"{"m": 19, "theta": 1.0, "units": {"kind": "linear", "v": 1.0},
                     "weights": 0.3, "initial": "random"}"#;
const E1_REST: &str = r#"{"m": 19, "theta": 1.0, "units": {"kind": "linear", "v": 1.0},
                          "weights": 0.3, "initial": "zero"}"#;

#[test]
fn simulate_e1_from_rest_writes_twenty_grand_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1_REST);
    let out = dir.path().join("out");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--trials", "1", "--seed", "1",
        "--max-time", "20", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    let rows: Vec<&str> = events.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("19")));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("19  20"), "{stdout}");
    assert!(!out.join("samples.csv").exists());
}

#[test]
fn simulate_single_unit_gives_singleton_rows_and_samples() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "one.json",
        r#"{"m": 1, "theta": 1.0, "units": {"kind": "linear", "v": 1.0},
            "weights": 0.0, "initial": "zero"}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--max-events", "5", "--sample", "0.5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    let expected = "n,t,coalition_size,members\n0,1,1,1\n1,2,1,1\n2,3,1,1\n3,4,1,1\n4,5,1,1\n";
    assert_eq!(events, expected);
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    assert!(samples.starts_with("t,S_1\n0,0\n0.5,0.5\n1,0\n"), "{samples}");
}

#[test]
fn several_trials_get_their_own_directories() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1);
    let out = dir.path().join("out");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--trials", "3", "--max-events", "4",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    for k in 0..3 {
        assert!(out.join(format!("trial_{k:04}")).join("events.csv").exists());
    }
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cases = [
        ("syntax.json", "{\"m\": 2,\n \"units\": ]"),
        (
            "diag.json",
            r#"{"theta": 1.0, "units": [{"kind": "linear", "v": 1.0, "count": 2}],
                "weights": [[0.2, 0.3], [0.3, 0.0]]}"#,
        ),
        (
            "goal.json",
            r#"{"theta": 1.0, "units": [{"kind": "linear", "v": 1.0, "count": 2}],
                "weights": 0.3, "initial": [1.0, 0.0]}"#,
        ),
    ];
    let mut messages = Vec::new();
    for (name, text) in cases {
        let cfg = write_config(dir.path(), name, text);
        let o = run(&[
            "simulate", "--config", cfg.to_str().unwrap(), "--max-events", "1",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 2, "{name}");
        messages.push(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    assert!(messages[0].contains("line 2"), "{}", messages[0]);
    assert!(messages[1].contains("nonzero diagonal"));
    assert!(messages[2].contains("initial state not in Q"));

    let missing = run(&["verify", "--config", "/nonexistent.json", "--max-events", "1", "--out", "x"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&run(&["simulate", "--config", "c.json", "--out", "o"])), 2);
    assert_eq!(
        code(&run(&[
            "simulate", "--config", "c.json", "--out", "o", "--max-time", "1", "--max-events", "2"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["simulate", "--config", "c.json", "--out", "o", "--max-time", "1", "--trials", "0"])),
        2
    );
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn verify_e1_confirms_every_trial() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1);
    let out = dir.path().join("out");
    let o = run(&[
        "verify", "--config", cfg.to_str().unwrap(), "--trials", "100", "--seed", "42",
        "--max-time", "20", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut rdr = csv_reader(&text);
    let header: Vec<String> = rdr.next().unwrap();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<Vec<String>> = rdr.collect();
    assert_eq!(rows.len(), 100);
    for row in &rows {
        for check in ["theorem1", "waiting_time", "theorem2"] {
            assert_eq!(row[col(check)], "CONFIRMED", "{check}");
        }
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("theorem1"), "{stdout}");
}

fn csv_reader(text: &str) -> impl Iterator<Item = Vec<String>> + '_ {
    text.lines().map(|l| l.split(',').map(str::to_string).collect())
}

#[test]
fn verify_small_network_is_vacuous() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "m4.json",
        r#"{"m": 4, "theta": 1.0, "units": {"kind": "linear", "v": 1.0},
            "weights": 0.3, "initial": "random"}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "verify", "--config", cfg.to_str().unwrap(), "--trials", "5", "--max-time", "20",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.contains("VACUOUS,hypotheses-unmet"), "{line}");
        assert!(!line.contains("VIOLATED"));
    }
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "blowup.json",
        r#"{"theta": 1.0,
            "units": [{"kind": "ode", "rhs": ["1.0 + 0.0 * math::sqrt(30.0 - x1)", "1.0"], "sat_index": 0}],
            "weights": 0.0, "initial": "zero"}"#,
    );
    let out = dir.path().join("out");
    let o = run(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--max-time", "100",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.lines().count() > 1);
}

#[test]
fn sweep_flips_largeness_at_nineteen() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1);
    let out = dir.path().join("out");
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--axis", "m=10..25", "--axis", "delta=0.3",
        "--axis", "theta=1", "--trials", "2", "--max-time", "5", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv_reader(&text);
    let header = lines.next().unwrap();
    let large = header.iter().position(|h| h == "is_large").unwrap();
    for row in lines {
        let m: usize = row[0].parse().unwrap();
        assert_eq!(row[large] == "true", m >= 19, "m = {m}");
    }
}

#[test]
fn sweep_with_empty_axis_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1);
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--axis", "delta=", "--max-time", "5",
        "--out", dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
}

#[test]
fn identical_seeds_give_identical_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "e1.json", E1);
    let mut contents = Vec::new();
    for (k, extra) in [(0, None), (1, None), (2, Some("--sequential"))] {
        let out = dir.path().join(format!("out{k}"));
        let mut args = vec![
            "simulate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--max-time", "10",
            "--sample", "0.1", "--out", out.to_str().unwrap(),
        ];
        args.extend(extra);
        assert_eq!(code(&run(&args)), 0);
        contents.push((
            fs::read(out.join("events.csv")).unwrap(),
            fs::read(out.join("samples.csv")).unwrap(),
        ));
    }
    assert_eq!(contents[0], contents[1]);
    assert_eq!(contents[0], contents[2]);
}
