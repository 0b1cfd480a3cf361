//! The full acceptance suite on the default scenario. Prints one line per
//! criterion and fails if any criterion fails. Lines go straight to stderr so
//! they show without `--nocapture`.

use std::io::Write;

use hsl_cli::config::ScenarioConfig;
use hsl_cli::pipelines::verify_all;

#[test]
fn acceptance_criteria() {
    let cfg = ScenarioConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let (_, results) = verify_all(&cfg, dir.path(), |r| report(&r.line())).unwrap();
    assert_eq!(results.len(), 13);

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 14);
    assert!(summary.starts_with("id,status,measured,bound,runtime"));

    let failed: Vec<usize> = results.iter().filter(|r| !r.pass()).map(|r| r.id).collect();
    report(&format!("{} of 13 criteria pass", 13 - failed.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}
