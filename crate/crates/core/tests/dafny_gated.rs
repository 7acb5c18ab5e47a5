//! Checks against a real verifier. Each test prints a skip notice and returns
//! when no verifier is installed; set `VERIGRADE_VERIFIER_CMD` to point at one.

use std::path::{Path, PathBuf};
use std::time::Duration;

use verigrade_core::attempt::run_attempt;
use verigrade_core::backend::{program_available, Backend, BackendConfig, VerifyStatus, ENV_VERIFIER_CMD};
use verigrade_core::bank::load_bank;
use verigrade_core::oracle::{check_spec, self_check};
use verigrade_core::syntax::{emit, parse_unit};
use verigrade_core::testmode::{to_test_mode, TransformOptions};

const TIMEOUT: Duration = Duration::from_secs(120);

fn verifier() -> Option<Box<dyn Backend>> {
    let cfg = BackendConfig { timeout: TIMEOUT, ..Default::default() }.with_env().ok()?;
    if program_available(&cfg.verifier_program) {
        Some(cfg.build())
    } else {
        eprintln!(
            "skipped: no verifier found (`{}` not available; set {ENV_VERIFIER_CMD})",
            cfg.verifier_program.display()
        );
        None
    }
}

fn bank_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bank")
}

#[test]
fn first_past_the_post_verifies() {
    let Some(backend) = verifier() else { return };
    let bank = load_bank(&bank_dir()).unwrap();
    let ex = bank.get("first-past-the-post").unwrap();
    let v = run_attempt(ex, "!=", backend.as_ref());
    assert!(v.completed, "{}", v.feedback);
    assert!(v.verified_count >= 1);
    let v = run_attempt(ex, "==", backend.as_ref());
    assert!(!v.completed);
}

#[test]
fn every_reference_passes_self_check() {
    let Some(backend) = verifier() else { return };
    let bank = load_bank(&bank_dir()).unwrap();
    for ex in bank.iter() {
        if let Some(asset) = &ex.hidden_oracle {
            let v = self_check(asset, backend.as_ref(), TIMEOUT).unwrap();
            assert!(v.consistent, "{}: {:?}", ex.id, v.consistency_report);
            assert!(v.captures, "{}: {:?}", ex.id, v.capture_report);
        }
    }
}

#[test]
fn capture_distinguishes_exact_from_empty_addition_spec() {
    let Some(backend) = verifier() else { return };
    let bank = load_bank(&bank_dir()).unwrap();
    let ex = bank.get("a2-add-spec").unwrap();
    let asset = ex.hidden_oracle.as_ref().unwrap();
    let exact = ex.template.splice("  ensures r == a + b\n{\n  r := a + b;\n}");
    let empty = ex.template.splice("{\n  r := a + b;\n}");
    let v = check_spec(&exact, asset, backend.as_ref(), TIMEOUT).unwrap();
    assert!(v.captures, "{:?}", v.capture_report);
    let v = check_spec(&empty, asset, backend.as_ref(), TIMEOUT).unwrap();
    assert!(!v.captures, "{:?}", v.capture_report);
}

#[test]
fn false_assertion_fails_statically_and_at_runtime_in_test_mode() {
    let Some(backend) = verifier() else { return };
    let src = "method Main() {\n  var x := 2;\n  assert x + x == 5;\n  print x, \"\\n\";\n}\n";
    assert_eq!(backend.verify(src, TIMEOUT).status, VerifyStatus::Fail);
    let test = emit(&to_test_mode(&parse_unit(src).unwrap(), &TransformOptions::default()));
    let run = backend.run(&test, TIMEOUT).unwrap();
    assert!(!run.succeeded());
    let all = format!("{}{}", String::from_utf8_lossy(&run.stdout), String::from_utf8_lossy(&run.stderr));
    assert!(all.contains("(3,"), "failure does not point at line 3: {all}");
}
