//! Acceptance suite: one test per certification criterion, each printing a
//! pass/fail line and enforcing its runtime budget.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use ellconn::selftest::{
    self, criterion_discrepancy_ledger, criterion_elliptic_kernel, criterion_hopf_suite,
    criterion_kodaira_suite, criterion_oper_suite, criterion_rejection_suite,
    criterion_secondary_suite, criterion_torus_suite, CriterionResult,
};
use ellconn::verifier::VerifyConfig;

fn cfg() -> VerifyConfig {
    VerifyConfig::default()
}

fn check(result: CriterionResult, started: Instant, budget_secs: u64) {
    let elapsed = started.elapsed();
    println!(
        "criterion {} ({}): {} - {} [{:.2?}]",
        result.id,
        result.name,
        if result.pass { "PASS" } else { "FAIL" },
        result.details,
        elapsed
    );
    assert!(
        result.pass,
        "criterion {} failed: {}",
        result.id, result.details
    );
    assert!(
        elapsed.as_secs() <= budget_secs,
        "criterion {} exceeded its {}s budget: {:.2?}",
        result.id,
        budget_secs,
        elapsed
    );
}

#[test]
fn criterion_1_elliptic_kernel() {
    let t = Instant::now();
    check(criterion_elliptic_kernel(&cfg()), t, 5);
}

#[test]
fn criterion_2_hopf_suite() {
    let t = Instant::now();
    check(criterion_hopf_suite(&cfg()), t, 30);
}

#[test]
fn criterion_3_kodaira_suite() {
    let t = Instant::now();
    check(criterion_kodaira_suite(&cfg()), t, 60);
}

#[test]
fn criterion_4_torus_suite() {
    let t = Instant::now();
    check(criterion_torus_suite(&cfg()), t, 20);
}

#[test]
fn criterion_5_secondary_suite() {
    let t = Instant::now();
    check(criterion_secondary_suite(&cfg()), t, 30);
}

#[test]
fn criterion_6_oper_suite() {
    let t = Instant::now();
    check(criterion_oper_suite(&cfg()), t, 20);
}

#[test]
fn criterion_7_rejection_suite() {
    let t = Instant::now();
    check(criterion_rejection_suite(&cfg()), t, 30);
}

#[test]
fn criterion_8_determinism() {
    // two full selftest runs at seed 7 must serialize to identical bytes
    let t = Instant::now();
    let cfg = VerifyConfig {
        seed: 7,
        ..VerifyConfig::default()
    };
    let a = selftest::run_selftest(&cfg);
    let b = selftest::run_selftest(&cfg);
    let ja = a.to_json();
    let jb = b.to_json();
    let pass = ja == jb && a.all_pass;
    println!(
        "criterion 8 (determinism): {} - selftest --seed 7 twice, byte-identical: {} [{:.2?}]",
        if pass { "PASS" } else { "FAIL" },
        ja == jb,
        t.elapsed()
    );
    assert!(ja == jb, "selftest reports differ between runs");
    assert!(a.all_pass, "selftest failed:\n{ja}");
}

#[test]
fn criterion_9_discrepancy_ledger() {
    let t = Instant::now();
    check(criterion_discrepancy_ledger(&cfg()), t, 30);
}
