//! A W3C WebDriver endpoint backed by [`Page`]. It understands the commands
//! the fuzzer issues and the marker-tagged scripts it executes.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::dom::NodeId;
use crate::page::{Event, Page};
use crate::threads::Threads;

const ELEMENT_KEY: &str = "element-6066-11e4-a52f-4d65726c4944";

type SessionMap = HashMap<String, Arc<Mutex<Page>>>;

#[derive(Default)]
struct State {
    sessions: Mutex<SessionMap>,
    created: AtomicU64,
    commands: AtomicU64,
}

pub struct FakeBrowser {
    addr: SocketAddr,
    state: Arc<State>,
    _threads: Threads,
}

struct Failure {
    status: u16,
    error: &'static str,
    message: String,
}

fn fail(status: u16, error: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        status,
        error,
        message: message.into(),
    }
}

type Reply = Result<Value, Failure>;

impl FakeBrowser {
    pub fn start() -> io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("not an IP listener"))?;
        let state = Arc::new(State::default());
        let shared = Arc::clone(&state);
        let threads = Threads::spawn(server, 8, move |request| handle(request, &shared));
        Ok(Self {
            addr,
            state,
            _threads: threads,
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Sessions opened since start.
    pub fn sessions_created(&self) -> u64 {
        self.state.created.load(Ordering::SeqCst)
    }

    pub fn open_sessions(&self) -> usize {
        self.state.sessions.lock().expect("sessions poisoned").len()
    }
}

fn handle(mut request: Request, state: &State) {
    state.commands.fetch_add(1, Ordering::Relaxed);
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let args: Value = if body.trim().is_empty() {
        Value::Null
    } else {
        match serde_json::from_str(&body) {
            Ok(v) => v,
            Err(e) => return respond(request, Err(fail(400, "invalid argument", e.to_string()))),
        }
    };
    let path = request.url().split('?').next().unwrap_or_default().to_string();
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let reply = route(request.method(), &segments, &args, state);
    respond(request, reply);
}

fn respond(request: Request, reply: Reply) {
    let (status, value) = match reply {
        Ok(value) => (200, value),
        Err(f) => (f.status, json!({"error": f.error, "message": f.message, "stacktrace": ""})),
    };
    let body = json!({ "value": value }).to_string();
    let header = Header::from_bytes("Content-Type", "application/json; charset=utf-8").expect("static header");
    let _ = request.respond(Response::from_string(body).with_status_code(status).with_header(header));
}

fn route(method: &Method, segments: &[&str], args: &Value, state: &State) -> Reply {
    match (method, segments) {
        (Method::Get, ["status"]) => Ok(json!({"ready": true, "message": "testkit browser"})),
        (Method::Post, ["session"]) => new_session(args, state),
        (Method::Delete, ["session", id]) => {
            state.sessions.lock().expect("sessions poisoned").remove(*id);
            Ok(Value::Null)
        }
        (_, ["session", id, rest @ ..]) => {
            let page = state
                .sessions
                .lock()
                .expect("sessions poisoned")
                .get(*id)
                .cloned()
                .ok_or_else(|| fail(404, "invalid session id", format!("no session {id}")))?;
            let mut page = page.lock().expect("page poisoned");
            page.run_due();
            let reply = command(method, rest, args, &mut page);
            page.run_due();
            reply
        }
        _ => Err(fail(404, "unknown command", format!("{method} /{}", segments.join("/")))),
    }
}

fn new_session(args: &Value, state: &State) -> Reply {
    let caps = &args["capabilities"]["alwaysMatch"];
    let proxy = match &caps["proxy"] {
        Value::Null => None,
        p if p["proxyType"] == "manual" => p["httpProxy"].as_str().map(str::to_string),
        p => return Err(fail(400, "invalid argument", format!("unsupported proxy {p}"))),
    };
    let n = state.created.fetch_add(1, Ordering::SeqCst) + 1;
    let id = format!("session-{n}");
    state
        .sessions
        .lock()
        .expect("sessions poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(Page::new(proxy.clone()))));
    Ok(json!({
        "sessionId": id,
        "capabilities": {"browserName": "testkit", "proxy": caps["proxy"].clone()}
    }))
}

fn element_ref(page: &Page, node: NodeId) -> Value {
    json!({ ELEMENT_KEY: format!("{}-{}", page.generation, node) })
}

fn resolve_element(page: &Page, reference: &str) -> Result<NodeId, Failure> {
    let stale = || fail(404, "stale element reference", format!("element {reference} is stale"));
    let (generation, node) = reference.split_once('-').ok_or_else(stale)?;
    let node: NodeId = node.parse().map_err(|_| stale())?;
    if generation != page.generation.to_string() || node >= page.dom.len() || !page.dom.is_attached(node) {
        return Err(stale());
    }
    Ok(node)
}

fn find(page: &Page, args: &Value) -> Result<Vec<NodeId>, Failure> {
    if args["using"] != "xpath" {
        return Err(fail(400, "invalid argument", "only the xpath strategy is supported"));
    }
    let expr = args["value"].as_str().unwrap_or_default();
    page.find(expr).map_err(|e| fail(400, "invalid selector", e))
}

fn command(method: &Method, rest: &[&str], args: &Value, page: &mut Page) -> Reply {
    match (method, rest) {
        (Method::Post, ["url"]) => {
            let url = args["url"].as_str().ok_or_else(|| fail(400, "invalid argument", "missing url"))?;
            page.navigate(url).map_err(|e| fail(500, "unknown error", e))?;
            Ok(Value::Null)
        }
        (Method::Get, ["url"]) => Ok(json!(page.url.as_ref().map(|u| u.to_string()))),
        (Method::Post, ["elements"]) => {
            let nodes = find(page, args)?;
            Ok(Value::Array(nodes.into_iter().map(|n| element_ref(page, n)).collect()))
        }
        (Method::Post, ["element"]) => match find(page, args)?.first() {
            Some(&n) => Ok(element_ref(page, n)),
            None => Err(fail(404, "no such element", format!("no match for {}", args["value"]))),
        },
        (Method::Post, ["element", id, "click"]) => {
            let node = resolve_element(page, id)?;
            page.dispatch(node, Event::Click);
            Ok(Value::Null)
        }
        (Method::Post, ["element", id, "value"]) => {
            let node = resolve_element(page, id)?;
            let text = args["text"].as_str().ok_or_else(|| fail(400, "invalid argument", "missing text"))?;
            page.type_into(node, text);
            Ok(Value::Null)
        }
        (Method::Post, ["element", id, "text"]) | (Method::Get, ["element", id, "text"]) => {
            let node = resolve_element(page, id)?;
            Ok(json!(page.dom.text_content(node)))
        }
        (Method::Post, ["actions"]) => {
            perform(page, args)?;
            Ok(Value::Null)
        }
        (Method::Delete, ["actions"]) => Ok(Value::Null),
        (Method::Post, ["execute", "sync"]) => execute(page, args),
        _ => Err(fail(404, "unknown command", format!("{method} {}", rest.join("/")))),
    }
}

fn perform(page: &mut Page, args: &Value) -> Result<(), Failure> {
    let sources = args["actions"].as_array().cloned().unwrap_or_default();
    for source in sources {
        for action in source["actions"].as_array().cloned().unwrap_or_default() {
            match action["type"].as_str() {
                Some("pointerMove") => {
                    if let Some(reference) = action["origin"][ELEMENT_KEY].as_str() {
                        let node = resolve_element(page, reference)?;
                        page.dispatch(node, Event::MouseOver);
                    }
                }
                Some("scroll") => page.scroll_y += action["deltaY"].as_i64().unwrap_or(0),
                Some("pause" | "pointerDown" | "pointerUp" | "keyDown" | "keyUp") => {}
                other => return Err(fail(400, "invalid argument", format!("unsupported action {other:?}"))),
            }
        }
    }
    Ok(())
}

fn execute(page: &mut Page, args: &Value) -> Reply {
    let script = args["script"].as_str().unwrap_or_default();
    let marker = script
        .strip_prefix("/* ")
        .and_then(|s| s.split_once(" */"))
        .map(|(m, _)| m.trim())
        .unwrap_or_default();
    match marker {
        "exposure:serialize" => {
            let area = args["args"].get(0).and_then(Value::as_str);
            let nodes = match area {
                None => page.dom.document_element().into_iter().collect(),
                Some(expr) => page.find(expr).map_err(|e| fail(500, "javascript error", e))?,
            };
            match nodes.as_slice() {
                [one] => Ok(json!({"count": 1, "html": page.dom.outer_html(*one)})),
                many => Ok(json!({"count": many.len(), "html": null})),
            }
        }
        "exposure:install-error-hook" => {
            page.install_error_hook();
            Ok(Value::Null)
        }
        "exposure:collect-errors" => Ok(json!(page.errors())),
        "exposure:shadow-count" => Ok(json!(page.shadow_root_count())),
        _ => Err(fail(500, "javascript error", "script not understood by the testkit browser")),
    }
}
