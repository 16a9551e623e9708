use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn heglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heglab"))
        .args(args)
        .env_remove("HEGLAB_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn eval_prints_one_row() {
    let o = heglab(&["stability", "eval", "--uw", "1.5", "--pdoom", "0.1", "--pwd", "0.5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("u_c,u_w,p_doom,p_w_given_d,defector_payoff,stable"));
    assert!(lines[1].starts_with("1,1.5,0.1,0.5,0.675,true,"), "{}", lines[1]);
}

#[test]
fn sweep_prints_boundary() {
    let o = heglab(&["stability", "sweep", "--pwd", "0.9", "--uw-grid", "1:3:3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "u_w,p_doom");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "1,0");
}

#[test]
fn monte_carlo_row() {
    let o = heglab(&["oversight", "mc", "--p", "0.001", "--n", "1000", "--trials", "20000", "--seed", "3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "0.63230");
    let mc: f64 = row[5].parse().unwrap();
    assert!((mc - 0.6323).abs() < 0.02);
}

#[test]
fn bad_input_exits_one() {
    assert_eq!(heglab(&["stability", "eval", "--uw", "1", "--pdoom", "1.5", "--pwd", "0.5"]).status.code(), Some(1));
    assert_eq!(heglab(&["stability", "eval", "--uw", "x"]).status.code(), Some(1));
    assert_eq!(heglab(&["nonsense"]).status.code(), Some(1));
    assert_eq!(heglab(&["protocol", "run", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(heglab(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_scenario_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"seed": 1, "policy": {}, "events": [{"tick": 0, "type": "teleport"}]}"#).unwrap();
    let o = heglab(&["protocol", "run", bad.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/events/0"));
}

#[test]
fn protocol_run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = heglab(&["protocol", "run", &scenario("full.json"), "--seed", "11", "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (la, lb) = (listing(&a), listing(&b));
    assert_eq!(la.len(), 9);
    assert_eq!(la, lb);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_heglab"))
        .args(["protocol", "run", &scenario("expiry.json"), "--format", "json"])
        .env("HEGLAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(listing(dir.path()).iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["report.json"]);
}

#[test]
fn schema_matches_shipped_file() {
    let o = heglab(&["protocol", "schema"]);
    let shipped = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/scenario.schema.json")).unwrap();
    assert_eq!(stdout(&o), shipped);
}
