use std::fs;
use std::path::Path;
use std::process::Command;

fn covaoi(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_covaoi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const SMALL: &str = r#"{"N": 4, "q_end": [60, 60], "S_b": 4e6}"#;

#[test]
fn usage_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(covaoi(&["run", "--bogus"], dir.path()).0, 3);
    assert_eq!(covaoi(&["run", "--baseline", "tdma"], dir.path()).0, 3);
    assert_eq!(covaoi(&["sweep", "--values", "1,2"], dir.path()).0, 3);
    assert_eq!(covaoi(&[], dir.path()).0, 3);
    assert_eq!(covaoi(&["--help"], dir.path()).0, 0);
}

#[test]
fn bad_scenario_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), r#"{"epsilon": 2.0}"#).unwrap();
    let (code, _, err) = covaoi(&["run", "--scenario", "s.json"], dir.path());
    assert_eq!(code, 3, "{err}");
    fs::write(dir.path().join("t.json"), r#"{"Nope": 1}"#).unwrap();
    assert_eq!(covaoi(&["run", "--scenario", "t.json"], dir.path()).0, 3);
    assert_eq!(covaoi(&["run", "--scenario", "missing.json"], dir.path()).0, 3);
}

#[test]
fn infeasible_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), r#"{"N": 4}"#).unwrap();
    let (code, _, err) = covaoi(&["run", "--scenario", "s.json"], dir.path());
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("infeasible"), "{err}");
}

#[test]
fn run_writes_tables_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), SMALL).unwrap();
    let (code, out, err) = covaoi(
        &["run", "--scenario", "s.json", "--seed", "3", "--out", "res", "--dump-problems", "dump.txt"],
        dir.path(),
    );
    assert_eq!(code, 0, "{out}{err}");
    let res = dir.path().join("res");
    for (file, table) in [("result.csv", "result"), ("iters.csv", "iters"), ("summary.csv", "summary")] {
        let text = fs::read_to_string(res.join(file)).unwrap();
        assert!(text.starts_with(&format!("# covaoi {table} v1\n")), "{file}");
    }
    let result = fs::read_to_string(res.join("result.csv")).unwrap();
    assert_eq!(result.lines().count(), 2 + 4);
    let summary = fs::read_to_string(res.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(2).unwrap().starts_with("noma_full,3,"), "{summary}");
    let scenario = fs::read_to_string(res.join("scenario.json")).unwrap();
    assert!(scenario.contains("\"seed\": 3") || scenario.contains("\"seed\":3"), "{scenario}");
    let dump = fs::read_to_string(dir.path().join("dump.txt")).unwrap();
    assert!(dump.starts_with("problem "));
    assert!(dump.contains("/beamforming\n"));
}

#[test]
fn sweep_rejects_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sp.json"), r#"{"param": "M", "values": []}"#).unwrap();
    let (code, _, err) = covaoi(&["sweep", "--spec", "sp.json"], dir.path());
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("empty"), "{err}");
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = covaoi(&["verify", "--out", "v"], dir.path());
    assert_eq!(code, 0, "{out}{err}");
    let text = fs::read_to_string(dir.path().join("v/verify.csv")).unwrap();
    assert!(text.starts_with("# covaoi verify v1\ncheck,passed,value,tolerance,detail\n"));
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(1) == Some("1")), "{text}");
}
