mod common;

use exposure_core::InteractionScript;
use exposure_fuzz::{record_session, RecordError, RecordOptions, SessionError};

#[test]
fn records_page_resources_and_target() {
    let session = common::record_fresh("basic");
    let paths: Vec<&str> = session.exchanges.iter().map(|e| e.path()).collect();
    assert_eq!(paths, ["/index.html", "/style.css", "/app.js", "/api/profile"]);
    assert_eq!(session.target_index, 3);
    assert_eq!(session.target().response_body, common::fixture("basic").api_body);
    let seqs: Vec<u64> = session.exchanges.iter().map(|e| e.sequence_no).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn recordings_differ_only_in_timestamp() {
    let a = common::record_fresh("arrays");
    let mut b = common::record_fresh("arrays");
    assert!(a.target().url.ends_with("/api/v2/stock/get?postcode=3000"));
    b.created_at = a.created_at;
    assert_eq!(a.to_archive_json(), b.to_archive_json());
}

#[test]
fn shipped_archive_matches_a_fresh_recording() {
    for name in ["basic", "arrays", "fallback-group", "sentinel"] {
        let fresh = common::record_fresh(name);
        let mut shipped = common::shipped(name);
        shipped.created_at = fresh.created_at;
        assert_eq!(shipped.exchanges, fresh.exchanges, "{name}");
        assert_eq!(shipped.target_index, fresh.target_index, "{name}");
    }
}

#[test]
fn unrequested_target_is_an_error() {
    let text = common::fixture("basic").script.replace("TARGET /api/profile", "TARGET /api/never");
    let script = InteractionScript::parse(&text).unwrap();
    let options = RecordOptions {
        upstream: Some(common::env().origin.addr()),
        ..RecordOptions::default()
    };
    match record_session(&script, 0, &common::driver(), &options) {
        Err(RecordError::Session(SessionError::TargetNeverRequested(m))) => assert_eq!(m, "/api/never"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unreachable_driver_is_reported() {
    let options = RecordOptions {
        upstream: Some(common::env().origin.addr()),
        ..RecordOptions::default()
    };
    let dead = exposure_fuzz::WebDriver::new("http://127.0.0.1:9");
    assert!(matches!(
        record_session(&common::script("basic"), 0, &dead, &options),
        Err(RecordError::DriverUnreachable(_))
    ));
}
