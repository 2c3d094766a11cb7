mod common;

use exposure_fuzz::{Exchange, Header, RecordedSession, SessionError};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn exchange(seq: u64, url: &str, body: Vec<u8>) -> Exchange {
    Exchange {
        method: "GET".into(),
        url: url.into(),
        request_headers: vec![Header::new("Accept", "*/*")],
        request_body: vec![],
        status: 200,
        response_headers: vec![Header::new("Content-Type", "application/octet-stream")],
        response_body: body,
        sequence_no: seq,
    }
}

#[test]
fn archive_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    let session = common::synthetic("http://a.test/api/x", br#"{"a":1,"b":[true,null]}"#);
    session.save(&path).unwrap();
    assert_eq!(RecordedSession::load(&path).unwrap(), session);
}

#[test]
fn large_binary_body_survives_by_hash() {
    let mut body: Vec<u8> = (0..10 * 1024 * 1024).map(|i: u32| (i.wrapping_mul(2_654_435_761) >> 13) as u8).collect();
    body[0] = 0;
    let before = Sha256::digest(&body);
    let session = RecordedSession::new(
        vec![
            exchange(0, "http://a.test/blob.bin", body),
            exchange(1, "http://a.test/api/x", br#"{"k":"v"}"#.to_vec()),
        ],
        "/api/",
        "big".into(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    session.save(&path).unwrap();
    let loaded = RecordedSession::load(&path).unwrap();
    assert_eq!(Sha256::digest(&loaded.exchanges[0].response_body), before);
    assert_eq!(loaded.target_index, 1);
}

#[test]
fn wrong_schema_version_is_rejected() {
    let session = common::synthetic("http://a.test/api/x", b"{}");
    let text = session.to_archive_json().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
    assert!(matches!(
        RecordedSession::from_archive_json(&text),
        Err(SessionError::SchemaVersionMismatch { .. })
    ));
    assert!(matches!(
        RecordedSession::from_archive_json("{not json"),
        Err(SessionError::CorruptArchive(_))
    ));
}

#[test]
fn shipped_archives_load_and_point_at_the_api() {
    for name in exposure_testkit::fixtures::ALL {
        let session = common::shipped(name);
        assert!(session.target().path().starts_with("/api/"), "{name}");
        let tree = session.target_tree().unwrap();
        assert_eq!(tree.root(), &common::fixture(name).api_json(), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_bodies_round_trip(
        bodies in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..512), 1..5),
        notes in "[ -~]{0,20}",
    ) {
        let mut exchanges: Vec<Exchange> = bodies
            .into_iter()
            .enumerate()
            .map(|(i, b)| exchange(i as u64, &format!("http://a.test/r{i}"), b))
            .collect();
        exchanges.push(exchange(99, "http://a.test/api/t", b"[1]".to_vec()));
        let session = RecordedSession::new(exchanges, "/api/t", notes).unwrap();
        let back = RecordedSession::from_archive_json(&session.to_archive_json()).unwrap();
        prop_assert_eq!(back, session);
    }
}
