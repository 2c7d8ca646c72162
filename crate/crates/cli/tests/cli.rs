use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn mms_duel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mms-duel"))
        .args(args)
        .output()
        .unwrap()
}

fn status(args: &[&str]) -> i32 {
    mms_duel(args).status.code().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn duel_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.jsonl");
    assert_eq!(
        status(&[
            "duel",
            "--n",
            "2",
            "--eps",
            "1/4",
            "--algo",
            "all-to-one",
            "--out",
            path_str(&out)
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 578 + 1);
    assert!(text.lines().last().unwrap().contains(r#""type":"violation","agent":1"#));

    assert_eq!(
        status(&["duel", "--budget", "10", "--out", path_str(&dir.path().join("b.jsonl"))]),
        2
    );
    let bad = r#"while read l; do echo '{"type":"assign","agent":9}'; done"#;
    assert_eq!(
        status(&["duel", "--cmd", bad, "--out", path_str(&dir.path().join("c.jsonl"))]),
        3
    );
    assert_eq!(status(&["duel", "--eps", "3/2"]), 64);
    assert_eq!(status(&["duel", "--algo", "random"]), 64);
}

#[test]
fn duel_without_out_streams_transcript() {
    let o = mms_duel(&["duel", "--n", "1", "--eps", "1/2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with(r#"{"type":"header","n":1,"epsilon":"1/2","kappa":"1","algo":"all-to-one"}"#));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.jsonl");
    assert_eq!(status(&["duel", "--algo", "round-robin", "--out", path_str(&good)]), 0);
    assert_eq!(status(&["verify", path_str(&good)]), 0);

    let text = fs::read_to_string(&good).unwrap();
    let truncated = dir.path().join("truncated.jsonl");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(status(&["verify", path_str(&truncated)]), 4);

    // The verdict line claims a different assigned cost.
    let mutated = dir.path().join("mutated.jsonl");
    let last = text.lines().last().unwrap();
    let cost_start = last.find(r#""assigned_cost":""#).unwrap() + r#""assigned_cost":""#.len();
    let forged = format!("{}1{}", &last[..cost_start], &last[cost_start..]);
    fs::write(&mutated, text.replace(last, &forged)).unwrap();
    let code = status(&["verify", path_str(&mutated)]);
    assert!(code != 0 && code != 4, "got {code}");

    assert_eq!(status(&["verify", path_str(&dir.path().join("missing.jsonl"))]), 4);
}

#[test]
fn mms_subcommand() {
    let o = mms_duel(&["mms", "--costs", "1,1,2", "--k", "2"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "2\npartition: [3] [1,2]\n");
    let o = mms_duel(&["mms", "--costs", "5", "--k", "3"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("5\n"));
    let o = mms_duel(&["mms", "--costs", "1/3,1/6", "--k", "1"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("1/2\n"));
    assert_eq!(status(&["mms", "--costs", "1,x", "--k", "2"]), 64);
}

#[test]
fn report_subcommand() {
    let o = mms_duel(&["report"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2);

    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.jsonl");
    let b = dir.path().join("b.jsonl");
    status(&["duel", "--out", path_str(&v)]);
    status(&["duel", "--budget", "3", "--out", path_str(&b)]);
    let o = mms_duel(&["report", path_str(&v), path_str(&b)]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("violation(a_1)"));
    assert!(text.contains("budget_exhausted"));
}

fn play(input: &str, out: &Path) -> (i32, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mms-duel"))
        .args(["play", "--n", "2", "--eps", "1/4", "--out", path_str(out)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap())
}

#[test]
fn play_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let won = dir.path().join("won.jsonl");
    let (code, text) = play("2\n2\n", &won);
    assert_eq!(code, 0);
    assert!(text.contains("violation by a_2"));
    assert_eq!(status(&["verify", path_str(&won)]), 0);

    let quit = dir.path().join("quit.jsonl");
    let (code, text) = play("5\nq\n", &quit);
    assert_eq!(code, 1);
    assert!(text.contains("expected a number from 1 to 2"));
    assert_eq!(fs::read_to_string(&quit).unwrap().lines().count(), 1);
}
