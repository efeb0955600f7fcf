use std::collections::BTreeMap;
use std::fs;

use holdercone::theorem_suite::{run_suite, write_suite_outputs, SuiteCase, SuiteConfig, Verdict};
use holdercone::FunctionSpec;

fn small_config(grid_level: u32) -> SuiteConfig {
    let case = |function, beta, x0| SuiteCase {
        function,
        alpha: 0.5,
        beta,
        x0,
    };
    SuiteConfig {
        grid_level,
        wavelet_level: 12,
        cases: vec![
            case(FunctionSpec::flat_family(4.0, 0.1), 4.0, Some(0.9)),
            case(FunctionSpec::affine_plus(0.5), 2.0, Some(0.5)),
            case(FunctionSpec::power(3.0), 3.0, Some(0.7)),
        ],
        cone_pairs: Vec::new(),
        nesting: Vec::new(),
        auto_flatness: Vec::new(),
        counterexample: false,
        ..SuiteConfig::default()
    }
}

#[test]
fn default_config_round_trips() {
    let cfg = SuiteConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SuiteConfig::from_json(&text).unwrap(), cfg);
}

#[test]
fn reports_are_deterministic_and_outputs_idempotent() {
    let cfg = small_config(8);
    let a = run_suite(&cfg).unwrap();
    let b = run_suite(&cfg).unwrap();
    assert_eq!(a.reports, b.reports);
    assert!(a.passed);

    let dir = tempfile::tempdir().unwrap();
    write_suite_outputs(&a.reports, dir.path()).unwrap();
    let first = fs::read(dir.path().join("suite_report.json")).unwrap();
    let summary = fs::read(dir.path().join("suite_summary.csv")).unwrap();
    write_suite_outputs(&b.reports, dir.path()).unwrap();
    assert_eq!(fs::read(dir.path().join("suite_report.json")).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("suite_summary.csv")).unwrap(), summary);

    let claims: Vec<_> = a.reports.iter().map(|r| r.claim_id).collect();
    let mut sorted = claims.clone();
    sorted.sort();
    assert_eq!(claims, sorted);
}

/// Refining the seminorm grid by two levels moves no measured constant of a
/// smooth family by more than a fifth.
#[test]
fn budgets_are_stable_under_refinement() {
    let key = |r: &holdercone::theorem_suite::VerificationReport| {
        (r.claim_id, serde_json::to_string(&r.functions).unwrap())
    };
    let coarse: BTreeMap<_, _> = run_suite(&small_config(10))
        .unwrap()
        .reports
        .into_iter()
        .filter(|r| r.verdict == Verdict::Pass)
        .map(|r| (key(&r), r.measured_constant))
        .collect();
    let fine = run_suite(&small_config(12)).unwrap().reports;
    let mut compared = 0;
    for r in fine.iter().filter(|r| r.verdict == Verdict::Pass) {
        let Some(&c) = coarse.get(&key(r)) else { continue };
        let m = r.measured_constant;
        // negligible constants are dominated by quadrature noise
        if c.max(m) < 1e-3 {
            continue;
        }
        compared += 1;
        assert!(
            (m - c).abs() <= 0.2 * c.abs().max(m.abs()),
            "{} on {:?}: {c} at J=10, {m} at J=12",
            r.claim_id,
            r.functions
        );
    }
    assert!(compared >= 8, "only {compared} constants compared");
}
