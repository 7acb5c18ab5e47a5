use std::path::PathBuf;

use proptest::prelude::*;
use verigrade_core::backend::{parse_verifier_output, Position};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/verifier_output").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// (file, verified, errors, timeouts, diagnostics)
const EXPECTED: &[(&str, u64, u64, u64, usize)] = &[
    ("pass_xor.txt", 1, 0, 0, 0),
    ("fail_xor.txt", 0, 1, 0, 2),
    ("tree_size.txt", 3, 0, 0, 0),
    ("decreases_fail.txt", 1, 2, 0, 2),
    ("timeout.txt", 0, 1, 1, 1),
    ("mixed_inconclusive.txt", 4, 4, 1, 1),
    ("resolution_error.txt", 0, 1, 0, 1),
    ("parse_error.txt", 0, 1, 0, 1),
    ("crlf.txt", 2, 0, 0, 0),
];

#[test]
fn fixtures_parse_to_expected_counts() {
    for &(name, verified, errors, timeouts, diagnostics) in EXPECTED {
        let parsed = parse_verifier_output(&fixture(name)).unwrap_or_else(|_| panic!("{name} unrecognized"));
        assert_eq!(
            (parsed.verified, parsed.errors, parsed.timeouts, parsed.diagnostics.len()),
            (verified, errors, timeouts, diagnostics),
            "{name}"
        );
    }
}

#[test]
fn diagnostics_carry_positions_without_paths() {
    let parsed = parse_verifier_output(&fixture("fail_xor.txt")).unwrap();
    let first = &parsed.diagnostics[0];
    assert_eq!(first.position, Some(Position { line: 4, column: 0 }));
    assert!(first.message.starts_with("Error: a postcondition"));
    assert!(parsed.diagnostics.iter().all(|d| !d.message.contains("program.dfy")));
}

#[test]
fn output_without_summary_is_unrecognized() {
    assert!(parse_verifier_output(&fixture("garbage.txt")).is_err());
    assert!(parse_verifier_output(b"").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_verifier_output(&bytes);
    }

    #[test]
    fn noise_around_a_summary_keeps_its_counts(
        before in "[ -~\n]{0,120}",
        after in "[a-z \n]{0,40}",
        v in 0u64..1000,
        e in 0u64..1000,
    ) {
        let text = format!("{before}\nDafny program verifier finished with {v} verified, {e} errors\n{after}");
        let parsed = parse_verifier_output(text.as_bytes());
        if !before.contains("Dafny program verifier finished") && !before.contains("errors detected in") {
            let parsed = parsed.unwrap();
            prop_assert_eq!((parsed.verified, parsed.errors), (v, e));
        }
    }
}
