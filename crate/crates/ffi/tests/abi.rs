use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use stepwise_ffi::*;

const THEORY: &str = "theory demo
axiom f1: p
axiom f2: p -> q
theorem t1: q
end
";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(stepwise_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn session_walkthrough() {
    unsafe {
        let prover = stepwise_prover_new();
        let mut theory = ptr::null_mut();
        assert_eq!(stepwise_load_theory(prover, c(THEORY).as_ptr(), &mut theory), StepwiseStatus::Ok);
        let mut session = ptr::null_mut();
        assert_eq!(stepwise_start(prover, theory, c("t1").as_ptr(), &mut session), StepwiseStatus::Ok);

        let mut text = ptr::null_mut();
        assert_eq!(stepwise_state(prover, session, &mut text), StepwiseStatus::Ok);
        assert!(CStr::from_ptr(text).to_str().unwrap().contains('q'));
        stepwise_string_free(text);

        let mut done = true;
        assert_eq!(
            stepwise_apply(prover, session, c("apply [f1]").as_ptr(), 1000, &mut done),
            StepwiseStatus::StepFailed
        );
        assert!(!last_error().is_empty());
        assert_eq!(stepwise_apply(prover, session, c("apply [f2]").as_ptr(), 1000, &mut done), StepwiseStatus::Ok);
        assert!(!done);
        assert_eq!(stepwise_apply(prover, session, c("apply [f1]").as_ptr(), 1000, &mut done), StepwiseStatus::Ok);
        assert!(done);

        stepwise_session_free(prover, session);
        stepwise_theory_free(theory);
        stepwise_prover_free(prover);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let prover = stepwise_prover_new();
        let mut theory = ptr::null_mut();
        assert_eq!(stepwise_load_theory(prover, ptr::null(), &mut theory), StepwiseStatus::NullArgument);
        assert_eq!(
            stepwise_load_theory(prover, c("theory x\naxiom f1 p\nend\n").as_ptr(), &mut theory),
            StepwiseStatus::Parse
        );
        assert!(theory.is_null());
        let bad = [0xffu8, 0];
        assert_eq!(stepwise_load_theory(prover, bad.as_ptr().cast(), &mut theory), StepwiseStatus::InvalidUtf8);

        assert_eq!(stepwise_load_theory(prover, c(THEORY).as_ptr(), &mut theory), StepwiseStatus::Ok);
        let mut session = ptr::null_mut();
        assert_eq!(stepwise_start(prover, theory, c("nope").as_ptr(), &mut session), StepwiseStatus::NotFound);
        assert!(last_error().contains("nope"));
        assert_eq!(stepwise_start(prover, theory, c("t1").as_ptr(), &mut session), StepwiseStatus::Ok);
        let mut done = false;
        assert_eq!(stepwise_apply(prover, session, c("frobnicate").as_ptr(), 1000, &mut done), StepwiseStatus::Parse);
        assert_eq!(
            stepwise_apply(prover, session, c("auto").as_ptr(), 1000, ptr::null_mut()),
            StepwiseStatus::NullArgument
        );

        stepwise_session_free(prover, session);
        stepwise_theory_free(theory);
        stepwise_prover_free(prover);
        stepwise_prover_free(ptr::null_mut());
        stepwise_string_free(ptr::null_mut());
    }
}

#[test]
fn prove_returns_a_report() {
    unsafe {
        let prover = stepwise_prover_new();
        let mut theory = ptr::null_mut();
        assert_eq!(stepwise_load_theory(prover, c(THEORY).as_ptr(), &mut theory), StepwiseStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(stepwise_prove(prover, theory, c("t1").as_ptr(), 0, &mut json), StepwiseStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        stepwise_string_free(json);
        assert_eq!(report["outcome"], "proved");
        assert_eq!(report["theorem"], "t1");
        stepwise_theory_free(theory);
        stepwise_prover_free(prover);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "stepwise.h"

int main(void) {
    StepwiseProver *p = stepwise_prover_new();
    StepwiseTheory *t = NULL;
    StepwiseSession *s = NULL;
    bool done = false;
    const char *src = "theory demo\naxiom f1: p\naxiom f2: p -> q\ntheorem t1: q\nend\n";
    if (stepwise_load_theory(p, src, &t) != STEPWISE_STATUS_OK) return 10;
    if (stepwise_start(p, t, "t1", &s) != STEPWISE_STATUS_OK) return 11;
    if (stepwise_apply(p, s, "apply [f1]", 1000, &done) != STEPWISE_STATUS_STEP_FAILED) return 12;
    if (strlen(stepwise_last_error()) == 0) return 13;
    if (stepwise_apply(p, s, "apply [f2]", 1000, &done) != STEPWISE_STATUS_OK || done) return 14;
    if (stepwise_apply(p, s, "split", 1000, &done) != STEPWISE_STATUS_STEP_FAILED) return 15;
    if (stepwise_apply(p, s, "apply [f1]", 1000, &done) != STEPWISE_STATUS_OK || !done) return 16;
    stepwise_session_free(p, s);
    stepwise_theory_free(t);
    stepwise_prover_free(p);
    puts("ok");
    return 0;
}
"#;

/// Compiles a C client against the generated header and the shared library.
#[test]
fn c_client_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join(format!("{}stepwise_ffi{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX));
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("client");
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg(&lib)
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
