//! Drives the C ABI from Rust, and from a C program compiled against the generated header.

use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use solharden_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn corpus(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name);
    c(&std::fs::read_to_string(p).unwrap())
}

fn text(p: *const c_char) -> Option<String> {
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

struct Session(*mut SolhardenSession);

impl Session {
    fn new() -> Self {
        Session(solharden_session_new())
    }
    fn harden(&self, src: &CString, name: &str) -> SolhardenStatus {
        unsafe { solharden_harden(self.0, src.as_ptr(), c(name).as_ptr()) }
    }
    fn hardened(&self) -> Option<String> {
        text(unsafe { solharden_hardened_source(self.0) })
    }
    fn report(&self) -> Option<String> {
        text(unsafe { solharden_report_text(self.0) })
    }
    fn error(&self) -> Option<String> {
        text(unsafe { solharden_last_error(self.0) })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        unsafe { solharden_session_free(self.0) }
    }
}

#[test]
fn harden_matches_the_library() {
    let s = Session::new();
    let src = corpus("vulnerable.msol");
    assert_eq!(s.harden(&src, "vulnerable.msol"), SolhardenStatus::Ok);
    let direct = solharden::pipeline::harden_source(src.to_str().unwrap(), "vulnerable.msol", &Default::default()).unwrap();
    assert_eq!(s.hardened(), direct.hardened_source);
    assert_eq!(s.report().unwrap(), direct.report.to_text());
    assert!(s.error().is_none());
}

#[test]
fn analyze_reports_without_output() {
    let s = Session::new();
    let status = unsafe { solharden_analyze(s.0, corpus("faucet.msol").as_ptr(), c("faucet.msol").as_ptr()) };
    assert_eq!(status, SolhardenStatus::Ok);
    assert!(s.hardened().is_none());
    assert!(s.report().unwrap().contains("REENTRANCY SameFunction fn=claim"));
    let json: serde_json::Value = serde_json::from_str(&text(unsafe { solharden_report_json(s.0) }).unwrap()).unwrap();
    assert_eq!(json[0]["reentrancy"][0]["function"], "claim");
}

#[test]
fn syntax_error_clears_previous_results() {
    let s = Session::new();
    assert_eq!(s.harden(&corpus("faucet.msol"), "faucet.msol"), SolhardenStatus::Ok);
    assert_eq!(s.harden(&c("contract Bad {\n  function f( {}\n}\n"), "bad.msol"), SolhardenStatus::Syntax);
    assert!(s.hardened().is_none() && s.report().is_none());
    assert!(s.error().unwrap().starts_with("bad.msol:2:"), "{:?}", s.error());
}

#[test]
fn strategies_are_validated() {
    let s = Session::new();
    assert_eq!(unsafe { solharden_set_strategies(s.0, c("gas").as_ptr()) }, SolhardenStatus::Config);
    assert!(s.error().is_some());
    assert_eq!(unsafe { solharden_set_strategies(s.0, c("").as_ptr()) }, SolhardenStatus::Ok);
    assert_eq!(s.harden(&corpus("bec.msol"), "bec.msol"), SolhardenStatus::Config);
    assert_eq!(unsafe { solharden_set_strategies(s.0, c("integer").as_ptr()) }, SolhardenStatus::Ok);
    assert_eq!(s.harden(&corpus("vulnerable.msol"), "vulnerable.msol"), SolhardenStatus::Ok);
    let out = s.hardened().unwrap();
    assert!(out.contains("assert(") && !out.contains("_hcc_lock"));
}

#[test]
fn mark_patches_tags_output() {
    let s = Session::new();
    assert_eq!(unsafe { solharden_set_mark_patches(s.0, true) }, SolhardenStatus::Ok);
    assert_eq!(s.harden(&corpus("bec.msol"), "bec.msol"), SolhardenStatus::Ok);
    assert!(s.hardened().unwrap().contains("/* HCC */"));
}

#[test]
fn diff_classifies_and_flags_broken_runs() {
    let s = Session::new();
    let src = corpus("faucet.msol");
    let scenario = corpus("scenarios/faucet_attack.toml");
    let status = unsafe { solharden_diff(s.0, src.as_ptr(), c("faucet.msol").as_ptr(), scenario.as_ptr()) };
    assert_eq!(status, SolhardenStatus::Ok);
    assert!(s.report().unwrap().contains("attack PREVENTED"));

    let relabelled = c(&scenario.to_str().unwrap().replace("tag = \"attack\"", "tag = \"benign\""));
    let status = unsafe { solharden_diff(s.0, src.as_ptr(), c("faucet.msol").as_ptr(), relabelled.as_ptr()) };
    assert_eq!(status, SolhardenStatus::Broken);
    assert!(s.report().unwrap().contains("benign BROKEN"));

    let status = unsafe { solharden_diff(s.0, src.as_ptr(), c("faucet.msol").as_ptr(), c("txs = 3").as_ptr()) };
    assert_eq!(status, SolhardenStatus::Scenario);
}

#[test]
fn bad_arguments_are_reported_not_trusted() {
    let s = Session::new();
    assert_eq!(unsafe { solharden_harden(s.0, ptr::null(), c("x").as_ptr()) }, SolhardenStatus::NullArgument);
    assert_eq!(s.error().as_deref(), Some("source is null"));
    let bad_utf8 = CString::new(vec![0xffu8, 0xfe]).unwrap();
    assert_eq!(unsafe { solharden_harden(s.0, bad_utf8.as_ptr(), c("x").as_ptr()) }, SolhardenStatus::InvalidUtf8);
    assert!(text(unsafe { solharden_report_text(ptr::null()) }).is_none());
    unsafe { solharden_session_free(ptr::null_mut()) };
}

#[test]
fn version_is_the_crate_version() {
    assert_eq!(text(solharden_version()).unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_is_valid_c_and_cxx() {
    let header = std::fs::read_to_string(header_dir().join("solharden.h")).unwrap();
    for name in ["solharden_session_new", "solharden_harden", "solharden_diff", "solharden_last_error", "SOLHARDEN_STATUS_BROKEN"]
    {
        assert!(header.contains(name), "{name} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let st = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header_dir().join("solharden.h"))
            .status()
            .expect("a C toolchain is installed");
        assert!(st.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    // cargo emits the static library into target/<profile>/deps beside this test binary
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().join("libsolharden_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("driver");
    let st = Command::new("cc")
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/driver.c"))
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "driver failed: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
