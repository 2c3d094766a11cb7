//! Static origin for fixture hosts: `http://<name>.fixture.test/...` is
//! served from `fixtures/<name>/`, and every `/api/...` path returns the
//! fixture's `api.json`.

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use tiny_http::{Header, Request, Response, Server};

use crate::threads::Threads;

pub const HOST_SUFFIX: &str = ".fixture.test";
/// Sent on every response so recordings do not depend on the clock.
pub const FIXED_DATE: &str = "Thu, 01 Jan 2026 00:00:00 GMT";

pub struct OriginServer {
    addr: SocketAddr,
    hits: Arc<AtomicU64>,
    _threads: Threads,
}

impl OriginServer {
    pub fn start(root: &Path) -> io::Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("not an IP listener"))?;
        let hits = Arc::new(AtomicU64::new(0));
        let counter = Arc::clone(&hits);
        let root = root.to_path_buf();
        let threads = Threads::spawn(server, 4, move |request| {
            counter.fetch_add(1, Ordering::SeqCst);
            serve(request, &root);
        });
        Ok(Self {
            addr,
            hits,
            _threads: threads,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Requests served so far.
    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

fn locate(root: &Path, host: &str, path: &str) -> Option<PathBuf> {
    let name = host.split(':').next()?.strip_suffix(HOST_SUFFIX)?;
    if name.is_empty() || name.contains(['/', '\\', '.']) {
        return None;
    }
    let dir = root.join(name);
    let file = if path.starts_with("/api/") {
        "api.json"
    } else if path == "/" {
        "index.html"
    } else {
        path.trim_start_matches('/')
    };
    if file.split('/').any(|seg| seg == ".." || seg.is_empty()) {
        return None;
    }
    Some(dir.join(file)).filter(|p| p.is_file())
}

/// Host and path of a request target; absolute-form targets (as sent to a
/// proxy) carry their own host.
fn split_target(target: &str, host_header: &str) -> (String, String) {
    let (host, rest) = match target.split_once("://") {
        Some((_, after)) => match after.find('/') {
            Some(i) => (after[..i].to_string(), after[i..].to_string()),
            None => (after.to_string(), "/".to_string()),
        },
        None => (host_header.to_string(), target.to_string()),
    };
    let path = rest.split(['?', '#']).next().unwrap_or("/").to_string();
    (host, path)
}

fn serve(request: Request, root: &Path) {
    let host_header = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Host"))
        .map(|h| h.value.to_string())
        .unwrap_or_default();
    let (host, path) = split_target(request.url(), &host_header);
    let date = Header::from_bytes("Date", FIXED_DATE).expect("static header");
    let response = match locate(root, &host, &path).and_then(|p| std::fs::read(&p).ok().map(|b| (p, b))) {
        Some((file, bytes)) => {
            let ct = Header::from_bytes("Content-Type", content_type(&file)).expect("static header");
            Response::from_data(bytes).with_header(ct)
        }
        None => Response::from_data(Vec::new()).with_status_code(404),
    };
    let _ = request.respond(response.with_header(date));
}
