//! The simulated server. Answers every request from a recorded session and
//! substitutes the mutated body for the target exchange.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;
use tiny_http::{Header as HttpHeader, Response, Server};

use crate::session::{Exchange, Header, RecordedSession};

#[derive(Debug, Clone, Error)]
pub enum ReplayError {
    #[error("cannot bind replay server: {0}")]
    BindFailure(String),
    #[error("replay aborted on unrecorded request {0}")]
    AbortRun(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissPolicy {
    #[default]
    Respond404,
    AbortRun,
}

/// Headers that describe a single connection or the stored encoding and are
/// regenerated by the server instead of being replayed.
const DROPPED_HEADERS: &[&str] = &[
    "connection",
    "keep-alive",
    "proxy-connection",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
    "content-length",
    "content-encoding",
];

pub fn is_dropped_header(name: &str) -> bool {
    DROPPED_HEADERS.iter().any(|h| h.eq_ignore_ascii_case(name))
}

fn uppercase_escapes(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%'
            && i + 2 < bytes.len()
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            out.push('%');
            out.push(bytes[i + 1].to_ascii_uppercase() as char);
            out.push(bytes[i + 2].to_ascii_uppercase() as char);
            i += 3;
        } else {
            let ch = s[i..].chars().next().expect("char boundary");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

/// Canonical form used for request matching: fragment removed, scheme and
/// host lowercased, default port dropped, empty path written as `/`,
/// percent-escapes uppercased. The query is otherwise kept byte-for-byte.
pub fn normalize_url(url: &str) -> String {
    let url = url.split('#').next().unwrap_or_default();
    let Some((scheme, rest)) = url.split_once("://") else {
        return uppercase_escapes(url);
    };
    let scheme = scheme.to_ascii_lowercase();
    let authority_end = rest.find(['/', '?']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(authority_end);
    let authority = authority.rsplit_once('@').map_or(authority, |(_, host)| host);
    let mut authority = authority.to_ascii_lowercase();
    let default_port = match scheme.as_str() {
        "http" => Some(":80"),
        "https" => Some(":443"),
        _ => None,
    };
    if let Some(port) = default_port {
        if let Some(stripped) = authority.strip_suffix(port) {
            authority = stripped.to_string();
        }
    }
    let tail = if tail.starts_with('/') {
        tail.to_string()
    } else {
        format!("/{tail}")
    };
    format!("{scheme}://{authority}{}", uppercase_escapes(&tail))
}

fn without_scheme(normalized: &str) -> &str {
    normalized.split_once("://").map_or(normalized, |(_, rest)| rest)
}

/// Finds the recorded exchange for a request. Exact (method, normalized URL)
/// matches win; failing that, a match that differs only in scheme is
/// accepted so HTTPS captures can be replayed over the plaintext proxy.
/// With `strict_body` the request body must also match byte-for-byte.
pub fn match_request<'s>(
    session: &'s RecordedSession,
    method: &str,
    url: &str,
    body: Option<&[u8]>,
) -> Option<&'s Exchange> {
    let wanted = normalize_url(url);
    let candidates = || {
        session.exchanges.iter().filter(move |e| {
            e.method.eq_ignore_ascii_case(method) && body.is_none_or(|b| b == e.request_body.as_slice())
        })
    };
    candidates()
        .find(|e| normalize_url(&e.url) == wanted)
        .or_else(|| {
            candidates().find(|e| without_scheme(&normalize_url(&e.url)) == without_scheme(&wanted))
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServedResponse {
    pub status: u16,
    pub headers: Vec<Header>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ReplayPlan {
    pub session: Arc<RecordedSession>,
    pub active_mutation: Option<Vec<u8>>,
    pub miss_policy: MissPolicy,
    pub strict_bodies: bool,
    pub miss_log: Vec<String>,
}

impl ReplayPlan {
    pub fn baseline(session: Arc<RecordedSession>) -> Self {
        Self {
            session,
            active_mutation: None,
            miss_policy: MissPolicy::default(),
            strict_bodies: false,
            miss_log: Vec::new(),
        }
    }

    /// Starts a new run with the given mutation; the miss log is cleared.
    pub fn reset(&mut self, mutation: Option<Vec<u8>>) {
        self.active_mutation = mutation;
        self.miss_log.clear();
    }
}

/// Answers one request. Misses are logged; with `AbortRun` they also
/// surface as an error after a 404 has been produced.
pub fn serve(
    plan: &mut ReplayPlan,
    method: &str,
    url: &str,
    body: &[u8],
) -> Result<ServedResponse, ReplayError> {
    let strict = plan.strict_bodies.then_some(body);
    let target = plan.session.target();
    let Some(exchange) = match_request(&plan.session, method, url, strict) else {
        plan.miss_log.push(url.to_string());
        return match plan.miss_policy {
            MissPolicy::Respond404 => Ok(not_found()),
            MissPolicy::AbortRun => Err(ReplayError::AbortRun(url.to_string())),
        };
    };
    let is_target = exchange.method == target.method
        && normalize_url(&exchange.url) == normalize_url(&target.url)
        && (!plan.strict_bodies || exchange.request_body == target.request_body);
    let body = match (&plan.active_mutation, is_target) {
        (Some(mutated), true) => mutated.clone(),
        _ => exchange.response_body.clone(),
    };
    Ok(ServedResponse {
        status: exchange.status,
        headers: exchange
            .response_headers
            .iter()
            .filter(|h| !is_dropped_header(&h.name))
            .cloned()
            .collect(),
        body,
    })
}

fn not_found() -> ServedResponse {
    ServedResponse {
        status: 404,
        headers: Vec::new(),
        body: Vec::new(),
    }
}

struct Shared {
    plan: ReplayPlan,
    aborted: Option<String>,
}

/// A replay server on a loopback port. Browsers reach it as an HTTP proxy
/// (absolute-form request targets) or directly (origin-form plus Host).
pub struct ReplayServer {
    shared: Arc<Mutex<Shared>>,
    addr: SocketAddr,
    workers: ServerThreads,
}

const HANDLER_THREADS: usize = 4;

impl ReplayServer {
    pub fn start(plan: ReplayPlan) -> Result<Self, ReplayError> {
        Self::bind("127.0.0.1:0", plan)
    }

    pub fn bind(addr: &str, plan: ReplayPlan) -> Result<Self, ReplayError> {
        let server = Server::http(addr).map_err(|e| ReplayError::BindFailure(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| ReplayError::BindFailure("not an IP listener".into()))?;
        let shared = Arc::new(Mutex::new(Shared { plan, aborted: None }));
        let state = Arc::clone(&shared);
        let workers = ServerThreads::spawn(server, HANDLER_THREADS, move |request| handle(request, &state));
        Ok(Self {
            shared,
            addr,
            workers,
        })
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Prepares the next run: sets (or clears) the mutation and resets the
    /// miss log and abort flag.
    pub fn begin_run(&self, mutation: Option<Vec<u8>>) {
        let mut shared = self.shared.lock().expect("replay state poisoned");
        shared.plan.reset(mutation);
        shared.aborted = None;
    }

    pub fn miss_log(&self) -> Vec<String> {
        self.shared.lock().expect("replay state poisoned").plan.miss_log.clone()
    }

    /// The abort raised during the current run, if the plan's policy is
    /// `AbortRun` and a miss occurred.
    pub fn aborted(&self) -> Option<ReplayError> {
        let shared = self.shared.lock().expect("replay state poisoned");
        shared.aborted.clone().map(ReplayError::AbortRun)
    }

    pub fn shutdown(self) {
        drop(self.workers);
    }
}

/// A tiny_http listener drained by a fixed set of threads that stop when
/// the value is dropped.
pub(crate) struct ServerThreads {
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerThreads {
    pub(crate) fn spawn<F>(server: Server, count: usize, handler: F) -> Self
    where
        F: Fn(tiny_http::Request) + Send + Sync + 'static,
    {
        let server = Arc::new(server);
        let handler = Arc::new(handler);
        let stop = Arc::new(AtomicBool::new(false));
        let threads = (0..count)
            .map(|_| {
                let server = Arc::clone(&server);
                let handler = Arc::clone(&handler);
                let stop = Arc::clone(&stop);
                std::thread::spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        match server.recv_timeout(Duration::from_millis(50)) {
                            Ok(Some(request)) => handler(request),
                            Ok(None) => {}
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Self { stop, threads }
    }
}

impl Drop for ServerThreads {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn request_url(request: &tiny_http::Request) -> String {
    let target = request.url();
    if target.contains("://") {
        return target.to_string();
    }
    let host = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Host"))
        .map(|h| h.value.as_str().to_string())
        .unwrap_or_else(|| "localhost".into());
    format!("http://{host}{target}")
}

fn handle(mut request: tiny_http::Request, shared: &Mutex<Shared>) {
    if request.method() == &tiny_http::Method::Connect {
        let _ = request.respond(Response::empty(501));
        return;
    }
    let url = request_url(&request);
    let method = request.method().as_str().to_string();
    let mut body = Vec::new();
    let _ = request.as_reader().read_to_end(&mut body);
    let outcome = {
        let mut guard = shared.lock().expect("replay state poisoned");
        let outcome = serve(&mut guard.plan, &method, &url, &body);
        if let Err(ReplayError::AbortRun(url)) = &outcome {
            guard.aborted.get_or_insert_with(|| url.clone());
        }
        outcome
    };
    let served = outcome.unwrap_or_else(|_| not_found());
    log::debug!("replay {method} {url} -> {}", served.status);
    let mut response = Response::from_data(served.body).with_status_code(served.status);
    for h in &served.headers {
        if let Ok(header) = HttpHeader::from_bytes(h.name.as_bytes(), h.value.as_bytes()) {
            response.add_header(header);
        }
    }
    let _ = request.respond(response);
}
