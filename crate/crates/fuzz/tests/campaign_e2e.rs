mod common;

use std::collections::BTreeMap;

use exposure_fuzz::report::to_csv;
use exposure_fuzz::{fuzz_fields, preflight, run_campaign, CampaignError, FieldVerdictKind, ValidationOutcome};

fn flagged(name: &str, workers: usize) -> Vec<String> {
    let report = run_campaign(&common::script(name), &common::recorded(name), &common::options(workers)).unwrap();
    let mut v: Vec<String> = report.flagged_paths().iter().map(|p| p.to_string()).collect();
    v.sort();
    v
}

#[test]
fn basic_fixture_matches_oracle() {
    assert_eq!(flagged("basic", 2), common::expected_excessive("basic"));
}

#[test]
fn verdicts_do_not_depend_on_worker_count() {
    let kinds = |workers| -> BTreeMap<String, FieldVerdictKind> {
        run_campaign(&common::script("arrays"), &common::recorded("arrays"), &common::options(workers))
            .unwrap()
            .verdicts()
            .map(|v| (v.path.to_string(), v.verdict))
            .collect()
    };
    let one = kinds(1);
    assert_eq!(one.len(), 20);
    assert_eq!(one, kinds(4));
    assert_eq!(one["stores[0].products[0].available"], FieldVerdictKind::NonExcessive);
    assert_eq!(one["stores[0].products[0].qty"], FieldVerdictKind::Excessive);
}

#[test]
fn client_error_fixture_reports_client_error() {
    let report = run_campaign(
        &common::script("client-error"),
        &common::recorded("client-error"),
        &common::options(2),
    )
    .unwrap();
    let email = report.verdicts().find(|v| v.path.to_string() == "user.email").unwrap();
    assert_eq!(email.verdict, FieldVerdictKind::ClientError);
    assert!(email.detail.as_deref().unwrap().contains("toLowerCase"));
    assert_eq!(report.summary.client_error, 1);
    assert_eq!(report.validation.outcome, ValidationOutcome::Pass);
}

#[test]
fn sentinel_field_is_state_not_reached() {
    let report = run_campaign(&common::script("sentinel"), &common::recorded("sentinel"), &common::options(2)).unwrap();
    let status = report.verdicts().find(|v| v.path.to_string() == "status").unwrap();
    assert_eq!(status.verdict, FieldVerdictKind::StateNotReached);
    assert_eq!(report.summary.state_not_reached, 1);
}

#[test]
fn preflight_abort_reasons() {
    for (name, reason) in [("banner", 'B'), ("token", 'F'), ("shadow", 'S')] {
        let err = preflight(&common::script(name), &common::recorded(name), &common::options(1)).unwrap_err();
        assert_eq!(err.abort_reason(), Some(reason), "{name}: {err}");
    }
}

#[test]
fn preflight_of_deterministic_fixture_has_empty_mask() {
    for name in ["basic", "arrays", "fallback-group", "sentinel"] {
        let pf = preflight(&common::script(name), &common::recorded(name), &common::options(1)).unwrap();
        assert!(pf.mask.is_empty(), "{name}");
        assert!(pf.baseline_errors.is_empty(), "{name}");
    }
}

#[test]
fn dead_driver_aborts_the_campaign() {
    let script = common::script("basic");
    let session = common::recorded("basic");
    let pf = preflight(&script, &session, &common::options(1)).unwrap();
    let tree = session.target_tree().unwrap();
    let fields = tree.enumerate_leaves();
    let mut options = common::options(1);
    options.drivers = vec!["http://127.0.0.1:9".into()];
    match fuzz_fields(&script, &session, &tree, &fields, &pf, &options) {
        Err(CampaignError::Aborted { cause, partial }) => {
            assert!(cause.contains("10 consecutive"), "{cause}");
            // Two attempts per field: four fields finish as ClientError before the fifth trips the limit.
            assert_eq!(partial.len(), 4);
            assert!(partial.iter().all(|v| v.verdict == FieldVerdictKind::ClientError));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn csv_has_one_row_per_field() {
    let report = run_campaign(&common::script("basic"), &common::recorded("basic"), &common::options(2)).unwrap();
    let csv = to_csv(&report);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "path,verdict,duration_ms");
    assert_eq!(lines.len(), 1 + report.total_fields);
    assert_eq!(lines.iter().filter(|l| l.contains(",Excessive,")).count(), 8);
}
