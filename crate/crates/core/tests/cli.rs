//! End-to-end runs of the `solharden` binary.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn solharden(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solharden")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus(name: &str) -> String {
    common::corpus_dir().join(name).display().to_string()
}

fn copy_into(dir: &Path, name: &str) -> String {
    let dst = dir.join(name);
    fs::copy(common::corpus_dir().join(name), &dst).unwrap();
    dst.display().to_string()
}

#[test]
fn harden_writes_output_and_reports_guards() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("hardened.msol");
    let o = solharden(&["harden", "--strategy=reentrancy,integer", &corpus("vulnerable.msol"), "-o", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert_eq!(report.lines().filter(|l| l.starts_with("REENTRANCY")).count(), 1, "{report}");
    assert_eq!(report.lines().filter(|l| l.starts_with("PATCH Guard")).count(), 3, "{report}");
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("_hcc_lock_balance"));
}

#[test]
fn default_output_sits_next_to_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_into(dir.path(), "faucet.msol");
    let o = solharden(&["harden", &input]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("faucet.hardened.msol").exists());
}

#[test]
fn analyze_only_never_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("never.msol");
    let o = solharden(&["analyze-only", &corpus("vulnerable.msol"), "-o", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out_path.exists());
    assert!(stdout(&o).contains("REENTRANCY CrossFunction fn=removeAccount"));
}

#[test]
fn clean_file_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("clean.msol");
    fs::write(&input, "contract Clean {\n  bool open;\n  function close() public {\n    open = false;\n  }\n}\n").unwrap();
    let o = solharden(&["analyze-only", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "== clean.msol\n");
}

#[test]
fn diff_reports_prevented_attacks() {
    let o =
        solharden(&["diff", &corpus("vulnerable.msol"), &format!("--scenario={}", corpus("scenarios/vulnerable_attack.toml"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("3 attack PREVENTED"), "{text}");
    assert!(text.contains("summary: txs=5 equivalent=4 prevented=1 broken=0"), "{text}");
}

#[test]
fn broken_benign_tx_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // the exploit relabelled as benign: hardened code reverts it, which counts as breaking a benign tx
    let scenario = common::corpus_file("scenarios/faucet_attack.toml").replace("tag = \"attack\"", "tag = \"benign\"");
    let path = dir.path().join("relabelled.toml");
    fs::write(&path, scenario).unwrap();
    let o = solharden(&["diff", &corpus("faucet.msol"), "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("2 benign BROKEN"));
}

#[test]
fn syntax_errors_carry_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.msol");
    fs::write(&input, "contract Bad {\n  uint x;\n  function f( public {}\n}\n").unwrap();
    let o = solharden(&["harden", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("error: bad.msol:3:")), "{text}");
    assert!(!dir.path().join("bad.hardened.msol").exists());
}

#[test]
fn bad_configurations_exit_one() {
    let v = corpus("vulnerable.msol");
    assert_eq!(solharden(&["diff", &v]).status.code(), Some(1));
    assert_eq!(solharden(&["harden", "--strategy=", &v]).status.code(), Some(1));
    assert_eq!(solharden(&["harden", "--strategy=gas", &v]).status.code(), Some(1));
    let missing = solharden(&["analyze-only", "/nonexistent/x.msol"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn json_report_mirrors_text() {
    let o = solharden(&["analyze-only", "--report=json", &corpus("vulnerable.msol")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let file = &v[0];
    assert_eq!(file["source_name"], "vulnerable.msol");
    assert_eq!(file["reentrancy"][0]["kind"], "CrossFunction");
    assert_eq!(file["reentrancy"][0]["function"], "removeAccount");
    assert_eq!(file["integer"].as_array().unwrap().len(), 2);
}

#[test]
fn several_inputs_go_to_an_output_directory_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = solharden(&["harden", &corpus("faucet.msol"), &corpus("bec.msol"), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out_dir.join("faucet.msol").exists() && out_dir.join("bec.msol").exists());
    let text = stdout(&o);
    assert!(text.find("== faucet.msol").unwrap() < text.find("== bec.msol").unwrap());
}

#[test]
fn dump_cpg_writes_graphviz() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_into(dir.path(), "faucet.msol");
    let o = solharden(&["analyze-only", "--dump-cpg", &input]);
    assert_eq!(o.status.code(), Some(0));
    let dot = fs::read_to_string(dir.path().join("faucet.cpg.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn mark_patches_tags_synthesized_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("marked.msol");
    let o = solharden(&["harden", "--mark-patches", &corpus("bec.msol"), "-o", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out_path).unwrap();
    let marked: Vec<&str> = text.lines().filter(|l| l.contains("/* HCC */")).collect();
    assert!(!marked.is_empty() && marked.iter().all(|l| l.contains("assert(")), "{text}");
}
