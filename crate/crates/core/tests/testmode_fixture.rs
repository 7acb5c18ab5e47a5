use std::path::PathBuf;

use verigrade_core::syntax::{emit, parse_unit, tokenize, TokenKind};
use verigrade_core::testmode::{to_test_mode, transform_report, TransformOptions, TransformReport};

const STATIC_SPEC: &[&str] = &["assert", "assume", "requires", "ensures", "invariant"];

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Keyword occurrences outside comments and strings.
fn keyword_count(source: &str, word: &str) -> usize {
    let tokens = tokenize(source).unwrap();
    tokens.tokens.iter().filter(|t| t.kind == TokenKind::Ident && t.text(source) == word).count()
}

#[test]
fn checked_addition_becomes_runtime_checks() {
    let src = fixture("testmode/add_m_add_f_checked.dfy");
    let before = parse_unit(&src).unwrap();
    let after = to_test_mode(&before, &TransformOptions::default());
    let out = emit(&after);

    for word in STATIC_SPEC {
        assert_eq!(keyword_count(&out, word), 0, "`{word}` left in:\n{out}");
    }
    // Three assertions in Main plus the entry check for addM's precondition.
    assert_eq!(keyword_count(&out, "expect"), 4, "{out}");
    assert!(out.starts_with("method addM (a : int, b : int) returns (c : int) { expect a >= 0; c := a + b; }\n"), "{out}");
    assert!(out.contains("     expect m == x + y;   //Fails to verify"), "{out}");
    assert!(after.test_mode_skips.is_empty());

    let report = transform_report(&before, &after);
    assert_eq!(report, TransformReport { asserts: 3, requires: 1, ..Default::default() });
    assert_eq!(report.converted(), 4);

    let again = to_test_mode(&parse_unit(&out).unwrap(), &TransformOptions::default());
    assert_eq!(emit(&again), out);
}

#[test]
fn untouched_lines_are_preserved_verbatim() {
    let src = fixture("testmode/add_m_add_f_checked.dfy");
    let out = emit(&to_test_mode(&parse_unit(&src).unwrap(), &TransformOptions::default()));
    // Everything after addM's header and clauses is outside any removed construct.
    for line in src.lines().skip(3).filter(|l| !STATIC_SPEC.iter().any(|w| l.contains(w))) {
        assert!(out.lines().any(|o| o == line), "line `{line}` changed");
    }
}

#[test]
fn options_limit_what_is_rewritten() {
    let src = fixture("testmode/add_m_add_f_checked.dfy");
    let before = parse_unit(&src).unwrap();
    let opts = TransformOptions { requires: false, ..Default::default() };
    let out = emit(&to_test_mode(&before, &opts));
    assert_eq!(keyword_count(&out, "requires"), 1);
    assert_eq!(keyword_count(&out, "expect"), 3);
}

#[test]
fn corpus_listings_transform_idempotently() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    for entry in std::fs::read_dir(dir).unwrap() {
        let src = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        if src.contains("[???]") {
            continue;
        }
        let once = to_test_mode(&parse_unit(&src).unwrap(), &TransformOptions::default());
        let text = emit(&once);
        let twice = to_test_mode(&parse_unit(&text).unwrap(), &TransformOptions::default());
        assert_eq!(emit(&twice), text);
    }
}
