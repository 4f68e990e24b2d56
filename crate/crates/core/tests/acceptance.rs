//! Full acceptance suite, run without the libtest harness so the per-criterion
//! lines always reach the output. Pins the set of failing criteria: a
//! regression or a fix both make this test fail.

use std::collections::BTreeSet;
use std::process::ExitCode;

use critheat::acceptance::{evaluate_all, AcceptanceOptions, Verdict, CRITERIA};

/// Criteria whose stated target is measured but not met; the analysis of each
/// is in the project notes.
/// 8: Kelvin potentials decay like r^{-(n-3)}, not r^{-(n-5)}.
/// 14: freezing the potentials at the concentration point drops an error term
/// of the same order as the leading one.
const KNOWN_FAILURES: [u8; 2] = [8, 14];

fn main() -> ExitCode {
    let outcomes = evaluate_all(&AcceptanceOptions { seed: 1, cache: None });
    for o in &outcomes {
        println!("{}", o.line());
    }

    let mut problems = Vec::new();
    let ids: Vec<u8> = outcomes.iter().map(|o| o.id).collect();
    if ids != CRITERIA.iter().map(|(i, _)| *i).collect::<Vec<_>>() {
        problems.push(format!("criteria evaluated: {ids:?}"));
    }
    if outcomes.iter().any(|o| o.id == 15 && o.verdict != Verdict::Recorded) {
        problems.push("criterion 15 was not recorded".into());
    }
    let failed: BTreeSet<u8> = outcomes.iter().filter(|o| o.verdict == Verdict::Fail).map(|o| o.id).collect();
    let known: BTreeSet<u8> = KNOWN_FAILURES.into_iter().collect();
    if failed != known {
        problems.push(format!("failing criteria {failed:?}, known failures {known:?}"));
    }

    let passed = outcomes.iter().filter(|o| o.verdict == Verdict::Pass).count();
    println!("acceptance: {passed} PASS, {} FAIL (known: {known:?}), 1 INFO", failed.len());
    if problems.is_empty() {
        ExitCode::SUCCESS
    } else {
        for p in &problems {
            eprintln!("acceptance mismatch: {p}");
        }
        ExitCode::FAILURE
    }
}
