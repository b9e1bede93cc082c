use std::path::Path;
use std::process::{Command, Output};

const MAX2: &str = "(set-logic LIA)
(synth-fun max2 ((a Int) (b Int)) Int)
(declare-var x Int)
(declare-var y Int)
(constraint (>= (max2 x y) x))
(constraint (>= (max2 x y) y))
(constraint (or (= x (max2 x y)) (= y (max2 x y))))
(check-synth)
";

fn stun(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stun")).args(args).output().expect("runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_prints_a_define_fun() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "max2.sl", MAX2);
    for solver in ["stun", "cegis"] {
        let o = stun(&["solve", &f, "--solver", solver]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("(define-fun max2 ((a Int) (b Int)) Int"), "{}", stdout(&o));
    }
}

#[test]
fn emit_json_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "max2.sl", MAX2);
    let out = dir.path().join("r.json");
    let o = stun(&["solve", &f, "--emit-json", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["status"], "solved");
    assert_eq!(v["verified"], true);
    assert!(v["elapsed_ms"].is_u64());
}

#[test]
fn trace_goes_to_stderr_as_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "max2.sl", MAX2);
    let o = stun(&["solve", &f, "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stderr(&o).lines().map(String::from).collect();
    assert!(!lines.is_empty());
    for l in &lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}"));
        assert!(v["event"].is_string(), "{l}");
    }
}

#[test]
fn unsolved_and_invalid_inputs_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let contradictory = "(set-logic LIA)
(synth-fun f ((a Int)) Int)
(declare-var x Int)
(constraint (> (f x) x))
(constraint (< (f x) x))
(check-synth)
";
    let f = write(dir.path(), "bad.sl", contradictory);
    let o = stun(&["solve", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unrealizable-suspected"), "{}", stderr(&o));

    let g = write(dir.path(), "syntax.sl", "(set-logic LIA)\n(synth-fun f ((a Int)) Int\n");
    let o = stun(&["solve", &g]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("syntax.sl:"), "{}", stderr(&o));

    assert_eq!(stun(&["solve", "/nonexistent.sl"]).status.code(), Some(2));
    assert_eq!(stun(&["solve", &f, "--backend", "nope"]).status.code(), Some(2));
    assert_eq!(stun(&["solve", &f, "--bv-width", "0"]).status.code(), Some(2));
    assert_eq!(stun(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn gen_writes_the_family_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let o = stun(&["gen", "--out", out.to_str().unwrap(), "--max-n", "3", "--family", "max,hd"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
    assert!(out.join("max/max_3.sl").is_file());
    assert!(out.join("hd/hd-05.sl").is_file());
    assert!(!out.join("array_search").exists());
    // Generated files are accepted by solve.
    let o = stun(&["solve", out.join("max/max_3.sl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn suite_prints_markdown_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = stun(&[
        "suite", "--family", "max", "--max-n", "3", "--solvers", "stun", "--repeats", "1", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = stdout(&o);
    assert!(md.starts_with("| benchmark | stun |\n|---|---|\n| max_2 |"), "{md}");
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("benchmark,solver,status,elapsed_ms"));
    assert!(lines.next().unwrap().starts_with("max_2,stun,solved,"));
    assert!(lines.next().unwrap().starts_with("max_3,stun,solved,"));
}
