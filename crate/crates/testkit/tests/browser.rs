use std::io::{Read, Write};
use std::net::TcpStream;
use std::thread::sleep;
use std::time::Duration;

use exposure_testkit::{apps::RENDER_DELAY_MS, fixtures, FakeBrowser, Fixture, OriginServer};
use serde_json::{json, Value};

const ELEMENT_KEY: &str = "element-6066-11e4-a52f-4d65726c4944";

fn call(endpoint: &str, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
    let addr = endpoint.trim_start_matches("http://");
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status: u16 = raw[9..12].parse().unwrap();
    let (_, payload) = raw.split_once("\r\n\r\n").unwrap();
    (status, serde_json::from_str(payload).unwrap())
}

struct Session {
    endpoint: String,
    id: String,
}

impl Session {
    fn open(browser: &FakeBrowser, proxy: &str) -> Self {
        let caps = json!({"capabilities": {"alwaysMatch": {"proxy": {"proxyType": "manual", "httpProxy": proxy}}}});
        let (status, v) = call(&browser.endpoint(), "POST", "/session", Some(caps));
        assert_eq!(status, 200);
        Self {
            endpoint: browser.endpoint(),
            id: v["value"]["sessionId"].as_str().unwrap().to_string(),
        }
    }

    fn cmd(&self, method: &str, rest: &str, body: Option<Value>) -> (u16, Value) {
        let (status, v) = call(&self.endpoint, method, &format!("/session/{}/{rest}", self.id), body);
        (status, v["value"].clone())
    }

    fn find(&self, xpath: &str) -> Vec<Value> {
        let (status, v) = self.cmd("POST", "elements", Some(json!({"using": "xpath", "value": xpath})));
        assert_eq!(status, 200, "{v}");
        v.as_array().unwrap().clone()
    }

    fn settle(&self) {
        sleep(Duration::from_millis(RENDER_DELAY_MS * 3));
        // Timers run around every command.
        self.cmd("GET", "url", None);
    }
}

fn setup() -> (OriginServer, FakeBrowser) {
    (OriginServer::start(&fixtures::fixtures_dir()).unwrap(), FakeBrowser::start().unwrap())
}

#[test]
fn renders_profile_through_proxy() {
    let (origin, browser) = setup();
    let s = Session::open(&browser, &origin.addr().to_string());
    let (status, _) = s.cmd("POST", "url", Some(json!({"url": "http://basic.fixture.test/index.html"})));
    assert_eq!(status, 200);
    assert_eq!(origin.hits(), 4, "document, stylesheet, script and API call");
    s.settle();
    let found = s.find(r#"//div[@id="profile"]/p[@class="tier"]"#);
    assert_eq!(found.len(), 1);
    let reference = found[0][ELEMENT_KEY].as_str().unwrap();
    let (_, text) = s.cmd("GET", &format!("element/{reference}/text"), None);
    assert_eq!(text, "Tier: gold");
    let (_, html) = s.cmd(
        "POST",
        "execute/sync",
        Some(json!({"script": "/* exposure:serialize */ return 1", "args": ["//h1"]})),
    );
    assert_eq!(html["html"], r#"<h1 class="name">Ada Park</h1>"#);
    s.cmd("DELETE", "", None);
    assert_eq!(browser.open_sessions(), 0);
}

#[test]
fn click_and_input_drive_the_arrays_page() {
    let (origin, browser) = setup();
    let s = Session::open(&browser, &origin.addr().to_string());
    s.cmd("POST", "url", Some(json!({"url": "http://arrays.fixture.test/index.html"})));
    let input = s.find(r#"//input[@id="postcode"]"#)[0][ELEMENT_KEY].as_str().unwrap().to_string();
    s.cmd("POST", &format!("element/{input}/value"), Some(json!({"text": "3000"})));
    let button = s.find("//span[text()='Check availability']")[0][ELEMENT_KEY].as_str().unwrap().to_string();
    s.cmd("POST", &format!("element/{button}/click"), None);
    assert!(s.find(r#"//div[@id="stock-info"]/div[2]"#).is_empty(), "render is delayed");
    s.settle();
    assert_eq!(s.find(r#"//div[@id="stock-info"]/div[2]"#).len(), 1);
    assert_eq!(s.find("//span[.='available']").len(), 2);
}

#[test]
fn errors_need_the_hook_and_shadow_roots_are_counted() {
    let (origin, browser) = setup();
    let s = Session::open(&browser, &origin.addr().to_string());
    let exec = |marker: &str| {
        s.cmd("POST", "execute/sync", Some(json!({"script": format!("/* {marker} */"), "args": []}))).1
    };
    s.cmd("POST", "url", Some(json!({"url": "http://shadow.fixture.test/index.html"})));
    s.settle();
    assert_eq!(exec("exposure:shadow-count"), 1);
    s.cmd("POST", "url", Some(json!({"url": "http://sentinel.fixture.test/index.html"})));
    exec("exposure:install-error-hook");
    s.settle();
    assert_eq!(exec("exposure:collect-errors"), json!([]));
    let (status, v) = s.cmd("POST", "element", Some(json!({"using": "xpath", "value": "//nav"})));
    assert_eq!((status, v["error"].as_str()), (404, Some("no such element")));
}

#[test]
fn fixtures_load() {
    for name in fixtures::ALL {
        let f = Fixture::load(name).unwrap();
        assert!(f.script.contains("TARGET"), "{name}");
        assert!(!f.manifest.is_empty(), "{name}");
        assert!(f.api_json().is_object(), "{name}");
    }
}
