//! Acceptance suite: runs every verification criterion at the pinned
//! tolerances and prints one pass/fail line per criterion.

use linmod::verify;

#[test]
fn acceptance_criteria() {
    let report = verify::run(42).expect("verification suite must run");
    print!("{}", report.render_text());
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("criterion {}: {}\n{}", c.id, c.name, c.details.join("\n")))
        .collect();
    assert!(
        report.all_passed,
        "failed criteria:\n{}",
        failed.join("\n---\n")
    );
    assert_eq!(report.criteria.len(), 12);
}
