//! Plaintext HTTP capture proxy used to record a session.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use exposure_core::InteractionScript;
use thiserror::Error;
use tiny_http::{Header as HttpHeader, Response, Server};

use crate::driver::{drive, CampaignState, DriveError, DriveOptions};
use crate::replay::{is_dropped_header, ServerThreads};
use crate::session::{Exchange, Header, RecordedSession, SessionError};
use crate::webdriver::WebDriver;

const MAX_BODY: u64 = 512 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("cannot bind capture proxy: {0}")]
    ProxyBindFailure(String),
    #[error("browser driver failed: {0}")]
    DriverUnreachable(#[from] DriveError),
    #[error("recording run ended in state {0:?}")]
    Incomplete(CampaignState),
    #[error(transparent)]
    Session(#[from] SessionError),
}

struct Log {
    next_seq: AtomicU64,
    exchanges: Mutex<Vec<Exchange>>,
}

/// Forwards every request upstream and logs the exchange. With `upstream`
/// set, all hosts resolve to that address (useful for local test origins).
pub struct RecordingProxy {
    addr: SocketAddr,
    log: Arc<Log>,
    _workers: ServerThreads,
}

impl RecordingProxy {
    pub fn start(port: u16, upstream: Option<SocketAddr>) -> Result<Self, RecordError> {
        let server = Server::http(("127.0.0.1", port)).map_err(|e| RecordError::ProxyBindFailure(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| RecordError::ProxyBindFailure("not an IP listener".into()))?;
        let mut builder = ureq::AgentBuilder::new()
            .redirects(0)
            .timeout_connect(Duration::from_secs(10))
            .timeout_read(Duration::from_secs(120));
        if let Some(upstream) = upstream {
            builder = builder.resolver(move |_: &str| Ok(vec![upstream]));
        }
        let agent = builder.build();
        let log = Arc::new(Log {
            next_seq: AtomicU64::new(0),
            exchanges: Mutex::new(Vec::new()),
        });
        let shared = Arc::clone(&log);
        let workers = ServerThreads::spawn(server, 4, move |request| forward(request, &agent, &shared));
        Ok(Self {
            addr,
            log,
            _workers: workers,
        })
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Exchanges captured so far, in capture order.
    pub fn exchanges(&self) -> Vec<Exchange> {
        let mut list = self.log.exchanges.lock().expect("capture log poisoned").clone();
        list.sort_by_key(|e| e.sequence_no);
        list
    }
}

fn absolute_url(request: &tiny_http::Request) -> String {
    let target = request.url();
    if target.contains("://") {
        return target.to_string();
    }
    let host = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Host"))
        .map_or("localhost".to_string(), |h| h.value.to_string());
    format!("http://{host}{target}")
}

fn forward(mut request: tiny_http::Request, agent: &ureq::Agent, log: &Log) {
    if request.method() == &tiny_http::Method::Connect {
        let _ = request.respond(Response::empty(501));
        return;
    }
    let sequence_no = log.next_seq.fetch_add(1, Ordering::SeqCst);
    let method = request.method().as_str().to_string();
    let url = absolute_url(&request);
    let request_headers: Vec<Header> = request
        .headers()
        .iter()
        .map(|h| Header::new(h.field.as_str().as_str(), h.value.as_str()))
        .collect();
    let mut request_body = Vec::new();
    let _ = request.as_reader().read_to_end(&mut request_body);

    let mut upstream = agent.request(&method, &url);
    for h in &request_headers {
        let skip = is_dropped_header(&h.name)
            || h.name.eq_ignore_ascii_case("host")
            || h.name.eq_ignore_ascii_case("accept-encoding");
        if !skip {
            upstream = upstream.set(&h.name, &h.value);
        }
    }
    // Bodies are stored decoded so mutation can edit them.
    upstream = upstream.set("Accept-Encoding", "identity");
    let result = if request_body.is_empty() {
        upstream.call()
    } else {
        upstream.send_bytes(&request_body)
    };
    let response = match result {
        Ok(r) | Err(ureq::Error::Status(_, r)) => r,
        Err(ureq::Error::Transport(t)) => {
            log::warn!("upstream {url} failed: {t}");
            let _ = request.respond(Response::empty(502));
            return;
        }
    };
    let status = response.status();
    let mut names = response.headers_names();
    names.dedup();
    let response_headers: Vec<Header> = names
        .iter()
        .flat_map(|name| response.all(name).into_iter().map(move |v| Header::new(name, v)))
        .collect();
    let mut response_body = Vec::new();
    if let Err(e) = response.into_reader().take(MAX_BODY).read_to_end(&mut response_body) {
        log::warn!("reading upstream body of {url} failed: {e}");
        let _ = request.respond(Response::empty(502));
        return;
    }
    log::debug!("recorded #{sequence_no} {method} {url} -> {status}");
    let mut reply = Response::from_data(response_body.clone()).with_status_code(status);
    for h in &response_headers {
        if is_dropped_header(&h.name) {
            continue;
        }
        if let Ok(header) = HttpHeader::from_bytes(h.name.as_bytes(), h.value.as_bytes()) {
            reply.add_header(header);
        }
    }
    log.exchanges.lock().expect("capture log poisoned").push(Exchange {
        method,
        url,
        request_headers,
        request_body,
        status,
        response_headers,
        response_body,
        sequence_no,
    });
    let _ = request.respond(reply);
}

#[derive(Debug, Clone, Default)]
pub struct RecordOptions {
    pub upstream: Option<SocketAddr>,
    pub drive: DriveOptions,
    pub notes: String,
}

/// Drives `script` through a fresh capture proxy and returns everything the
/// browser exchanged up to S2.
pub fn record_session(
    script: &InteractionScript,
    proxy_port: u16,
    driver: &WebDriver,
    options: &RecordOptions,
) -> Result<RecordedSession, RecordError> {
    let proxy = RecordingProxy::start(proxy_port, options.upstream)?;
    let result = drive(script, driver, proxy.port(), &options.drive)?;
    if !result.final_state.is_updated() {
        return Err(RecordError::Incomplete(result.final_state));
    }
    Ok(RecordedSession::new(proxy.exchanges(), &script.target_matcher, options.notes.clone())?)
}
