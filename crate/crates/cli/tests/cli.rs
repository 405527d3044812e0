use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coprime-scope")).args(args).args(["--omit-runtime"]).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn record_shape() {
    let v = json(&run(&["census", "--d", "2", "--box", "1:100", "--law", "cop"]));
    for key in ["command", "params", "seed", "result", "error_bounds"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("runtime_ms").is_none());
    assert_eq!(v["command"], "census");
}

#[test]
fn seeds_change_samples() {
    let a = json(&run(&["sample", "--d", "2", "--window", "box:0:5", "--eps", "1e-3", "--seed", "1"]));
    let b = json(&run(&["sample", "--d", "2", "--window", "box:0:5", "--eps", "1e-3", "--seed", "0x1"]));
    let c = json(&run(&["sample", "--d", "2", "--window", "box:0:5", "--eps", "1e-3", "--seed", "2"]));
    assert_eq!(a, b);
    assert_ne!(a["result"], c["result"]);
}

#[test]
fn csv_output() {
    let out = run(&["limit", "--d", "2", "--window", "0,0;1,0", "--law", "cop", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5, "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["census", "--d", "2", "--box", "1:x"]).status.code(), Some(2));
    assert_eq!(run(&["freebox", "--n", "0", "--d", "2"]).status.code(), Some(2));
    // unreachable truncation target
    assert_eq!(run(&["sample", "--d", "2", "--window", "0,0", "--eps", "1e-12"]).status.code(), Some(3));
    assert_eq!(run(&["limit", "--d", "2", "--window", "0,0", "--out", "/nonexistent/dir/x.json"]).status.code(), Some(1));
}
