//! Acceptance gate: runs the full built-in criterion suite and requires every
//! criterion to pass at its stated tolerance.
//!
//! The suite prints one `criterion <i> <name>: PASS|FAIL` line per criterion
//! (visible with `--nocapture`); the same lines are what `gaincert selftest`
//! prints. This target exists so `cargo test` fails loudly if any criterion
//! regresses, with the offending lines quoted in the panic message.

#[test]
fn all_acceptance_criteria_pass() {
    let results = gaincert_cli::acceptance::run_all(false);
    assert_eq!(results.len(), 9, "criterion count changed");

    let failures: Vec<String> = results
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("criterion {} {}: FAIL {}", c.index, c.name, c.detail))
        .collect();
    assert!(
        failures.is_empty(),
        "acceptance criteria failed:\n{}",
        failures.join("\n")
    );
}
