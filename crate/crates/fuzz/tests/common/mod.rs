//! Shared end-to-end setup: one fixture origin and one scripted browser per
//! test binary, plus cached recordings of each fixture.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use exposure_core::InteractionScript;
use exposure_fuzz::{record_session, CampaignOptions, RecordOptions, RecordedSession, WebDriver};
use exposure_testkit::{fixtures_dir, FakeBrowser, Fixture, OriginServer};
use serde_json::Value;

pub struct Env {
    pub origin: OriginServer,
    pub browser: FakeBrowser,
}

pub fn env() -> &'static Env {
    static ENV: OnceLock<Env> = OnceLock::new();
    ENV.get_or_init(|| Env {
        origin: OriginServer::start(&fixtures_dir()).expect("origin"),
        browser: FakeBrowser::start().expect("browser"),
    })
}

pub fn driver() -> WebDriver {
    WebDriver::new(&env().browser.endpoint())
}

pub fn fixture(name: &str) -> Fixture {
    Fixture::load(name).expect("fixture")
}

pub fn script(name: &str) -> InteractionScript {
    InteractionScript::parse(&fixture(name).script).expect("fixture script parses")
}

pub fn record_fresh(name: &str) -> RecordedSession {
    let options = RecordOptions {
        upstream: Some(env().origin.addr()),
        notes: format!("fixture {name}"),
        ..RecordOptions::default()
    };
    record_session(&script(name), 0, &driver(), &options).expect("recording succeeds")
}

/// Recording of a fixture, made once per test binary.
pub fn recorded(name: &str) -> Arc<RecordedSession> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<RecordedSession>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().unwrap().get(name) {
        return Arc::clone(s);
    }
    let session = Arc::new(record_fresh(name));
    cache.lock().unwrap().insert(name.to_string(), Arc::clone(&session));
    session
}

pub fn options(workers: usize) -> CampaignOptions {
    let mut o = CampaignOptions::new(&env().browser.endpoint());
    o.workers = workers;
    o
}

fn walk(value: &Value, path: String, out: &mut Vec<String>) {
    let join_key = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match value {
        Value::Object(m) if !m.is_empty() => {
            for (k, v) in m {
                walk(v, join_key(k), out);
            }
        }
        Value::Array(a) if !a.is_empty() => {
            for (i, v) in a.iter().enumerate() {
                walk(v, format!("{path}[{i}]"), out);
            }
        }
        _ => out.push(path),
    }
}

/// Leaf paths of a JSON document, computed independently of the fuzzer.
/// Only valid for keys without `.`, `[`, `]` or `\`.
pub fn leaf_oracle(value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    if matches!(value, Value::Object(m) if !m.is_empty()) || matches!(value, Value::Array(a) if !a.is_empty()) {
        walk(value, String::new(), &mut out);
    }
    out
}

/// Fields a fixture page never shows: every leaf minus its manifest.
pub fn expected_excessive(name: &str) -> Vec<String> {
    let f = fixture(name);
    let mut out: Vec<String> = leaf_oracle(&f.api_json())
        .into_iter()
        .filter(|p| !f.manifest.contains(p))
        .collect();
    out.sort();
    out
}

/// The session archive shipped next to a fixture.
pub fn shipped(name: &str) -> RecordedSession {
    RecordedSession::load(&fixture(name).dir.join("session.json")).expect("shipped session loads")
}

/// A single-exchange session whose target returns `body`.
pub fn synthetic(url: &str, body: &[u8]) -> RecordedSession {
    use exposure_fuzz::{Exchange, Header};
    let exchange = Exchange {
        method: "GET".into(),
        url: url.into(),
        request_headers: vec![],
        request_body: vec![],
        status: 200,
        response_headers: vec![Header::new("Content-Type", "application/json")],
        response_body: body.to_vec(),
        sequence_no: 0,
    };
    RecordedSession::new(vec![exchange], "/", String::new()).expect("valid session")
}
