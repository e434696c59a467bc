use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinwheel"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("PINWHEEL_STATE_BUDGET")
        .output()
        .expect("run pinwheel")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn decide_text() {
    assert_eq!(stdout(&["decide", "--mode", "packing", "--periods", "2,3,5"]), "UNSCHEDULABLE\n");
    assert_eq!(stdout(&["decide", "--mode", "covering", "--periods", "2,3,5"]), "UNSCHEDULABLE\n");
    assert_eq!(
        stdout(&["decide", "--mode", "packing", "--periods", "2,4,8"]),
        "SCHEDULABLE\ncycle: 1 2 1 3 1 2 1 0\n"
    );
}

#[test]
fn decide_json() {
    let out = stdout(&["--format", "json", "decide", "--mode", "packing", "--periods", "2,4,8"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "pinwheel.decide");
    assert_eq!(v["version"], 1);
    assert_eq!(v["verdict"], "schedulable");
    assert_eq!(v["instance"]["periods"], serde_json::json!(["2", "4", "8"]));
    assert_eq!(v["schedule"]["cycle"], serde_json::json!([1, 2, 1, 3, 1, 2, 1, 0]));
}

#[test]
fn emitted_schedule_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let p = path.to_str().unwrap();
    stdout(&["decide", "--mode", "packing", "--periods", "2,4,8", "--emit-schedule", p]);
    assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), r#"{"prefix":[],"cycle":[1,2,1,3,1,2,1,0]}"#);
    assert_eq!(stdout(&["verify", "--mode", "packing", "--periods", "2,4,8", "--schedule", p]), "VALID\n");

    std::fs::write(&path, r#"{"prefix":[],"cycle":[1,2,0]}"#).unwrap();
    let out = run(&["verify", "--mode", "packing", "--periods", "2,3", "--schedule", p]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "INVALID\n");
}

#[test]
fn fold_text() {
    assert_eq!(
        stdout(&["fold", "--op", "cfold", "--theta", "4", "--periods", "3,17,18"]),
        "(3)\ndensity loss: 35/306\n"
    );
}

#[test]
fn certify_and_window() {
    assert_eq!(
        stdout(&["certify", "--periods", "3,4,5,5"]),
        "barrier: 47/48\ndensity: 59/60\nverdict: CERTIFIED\n"
    );
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["--format", "json", "certify", "--periods", "3,4,5,5"])).unwrap();
    assert_eq!(v["schema"], "pinwheel.certify");
    assert_eq!(v["barrier"]["value"], "47/48");
    assert_eq!(v["verdict"], "certified");
    assert_eq!(
        stdout(&["window", "--fixed", "3,6,6,8", "--len", "24"]),
        "jobs: (3,6,6,8)\nwindow: 24\nmin left-pushes: 2\nlive states: 162\n"
    );
}

#[test]
fn selftest_passes() {
    let out = stdout(&["selftest"]);
    assert_eq!(out.lines().count(), 6);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}

#[test]
fn usage_and_input_errors_exit_two() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["fold", "--op", "nope", "--theta", "4", "--periods", "3"]).status.code(), Some(2));
    assert_eq!(run(&["decide", "--mode", "packing", "--periods", "2,x"]).status.code(), Some(2));
    let out = run(&["verify", "--mode", "packing", "--periods", "2", "--schedule", "/nonexistent/s.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
