//! Recorded sessions: every request/response pair the client exchanged while
//! reaching the updated page, plus which of them is the target API call.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, Utc};
use exposure_core::ApiResponseTree;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no recorded request matches target `{0}`")]
    TargetNeverRequested(String),
    #[error("target response of {url} is not JSON: {reason}")]
    TargetNotJson { url: String, reason: String },
    #[error("session has no exchanges")]
    Empty,
    #[error("invalid exchange #{index}: {reason}")]
    InvalidExchange { index: usize, reason: String },
    #[error("malformed HAR: {0}")]
    MalformedHar(String),
    #[error("HAR entry {0} has no response content text")]
    MissingResponseContent(usize),
    #[error("archive schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { found: Value },
    #[error("corrupt session archive: {0}")]
    CorruptArchive(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub name: String,
    pub value: String,
}

impl Header {
    pub fn new(name: &str, value: &str) -> Self {
        Self {
            name: name.to_string(),
            value: value.to_string(),
        }
    }
}

pub fn header<'a>(headers: &'a [Header], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|h| h.name.eq_ignore_ascii_case(name))
        .map(|h| h.value.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub method: String,
    pub url: String,
    pub request_headers: Vec<Header>,
    pub request_body: Vec<u8>,
    pub status: u16,
    pub response_headers: Vec<Header>,
    pub response_body: Vec<u8>,
    pub sequence_no: u64,
}

impl Exchange {
    /// The path component of the URL, without query or fragment.
    pub fn path(&self) -> &str {
        url_path(&self.url)
    }
}

fn url_path(url: &str) -> &str {
    let after_scheme = url.split_once("://").map_or(url, |(_, rest)| rest);
    let start = after_scheme.find('/').unwrap_or(after_scheme.len());
    let path = &after_scheme[start..];
    let end = path.find(['?', '#']).unwrap_or(path.len());
    &path[..end]
}

fn check_url(url: &str) -> Result<(), String> {
    let (scheme, rest) = url
        .split_once("://")
        .ok_or_else(|| format!("`{url}` is not an absolute URL"))?;
    if scheme.is_empty() || !scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
        return Err(format!("`{url}` has an invalid scheme"));
    }
    let host_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    if rest[..host_end].is_empty() {
        return Err(format!("`{url}` has no host"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSession {
    pub exchanges: Vec<Exchange>,
    pub target_index: usize,
    pub created_at: DateTime<Utc>,
    pub notes: String,
}

/// Index of the first exchange whose URL path contains `matcher`, plus every
/// other match so callers can warn about ambiguity.
pub fn find_target(exchanges: &[Exchange], matcher: &str) -> Option<(usize, Vec<usize>)> {
    let matches: Vec<usize> = exchanges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.path().contains(matcher))
        .map(|(i, _)| i)
        .collect();
    let first = *matches.first()?;
    Some((first, matches))
}

impl RecordedSession {
    /// Builds a session, resolving the target exchange against `matcher`.
    pub fn new(exchanges: Vec<Exchange>, matcher: &str, notes: String) -> Result<Self, SessionError> {
        if exchanges.is_empty() {
            return Err(SessionError::TargetNeverRequested(matcher.to_string()));
        }
        let (target_index, all) = find_target(&exchanges, matcher)
            .ok_or_else(|| SessionError::TargetNeverRequested(matcher.to_string()))?;
        if all.len() > 1 {
            let urls: Vec<&str> = all.iter().map(|&i| exchanges[i].url.as_str()).collect();
            log::warn!(
                "target `{matcher}` matches {} exchanges; using the first. Matches: {}",
                all.len(),
                urls.join(", ")
            );
        }
        let session = Self {
            exchanges,
            target_index,
            created_at: Utc::now(),
            notes,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn target(&self) -> &Exchange {
        &self.exchanges[self.target_index]
    }

    pub fn target_tree(&self) -> Result<ApiResponseTree, SessionError> {
        let target = self.target();
        ApiResponseTree::parse(&target.response_body).map_err(|e| SessionError::TargetNotJson {
            url: target.url.clone(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.exchanges.is_empty() {
            return Err(SessionError::Empty);
        }
        if self.target_index >= self.exchanges.len() {
            return Err(SessionError::InvalidExchange {
                index: self.target_index,
                reason: "target_index out of range".into(),
            });
        }
        let mut seen = HashSet::new();
        for (index, e) in self.exchanges.iter().enumerate() {
            let invalid = |reason: String| SessionError::InvalidExchange { index, reason };
            check_url(&e.url).map_err(invalid)?;
            if !(100..=599).contains(&e.status) {
                return Err(invalid(format!("status {} out of range", e.status)));
            }
            if !seen.insert(e.sequence_no) {
                return Err(invalid(format!("duplicate sequence_no {}", e.sequence_no)));
            }
        }
        self.target_tree().map(|_| ())
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        let text = self.to_archive_json();
        fs::write(path, text).map_err(|source| SessionError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = fs::read_to_string(path).map_err(|source| SessionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_archive_json(&text)
    }

    pub fn to_archive_json(&self) -> String {
        let archive = Archive {
            schema_version: SCHEMA_VERSION,
            created_at: self.created_at,
            target_index: self.target_index,
            notes: self.notes.clone(),
            exchanges: self.exchanges.iter().map(ArchivedExchange::from).collect(),
        };
        serde_json::to_string_pretty(&archive).expect("archive serializes")
    }

    pub fn from_archive_json(text: &str) -> Result<Self, SessionError> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| SessionError::CorruptArchive(e.to_string()))?;
        match raw.get("schema_version") {
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
            Some(v) => return Err(SessionError::SchemaVersionMismatch { found: v.clone() }),
            None => return Err(SessionError::CorruptArchive("missing schema_version".into())),
        }
        let archive: Archive =
            serde_json::from_value(raw).map_err(|e| SessionError::CorruptArchive(e.to_string()))?;
        let exchanges = archive
            .exchanges
            .into_iter()
            .map(Exchange::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        let session = Self {
            exchanges,
            target_index: archive.target_index,
            created_at: archive.created_at,
            notes: archive.notes,
        };
        session
            .validate()
            .map_err(|e| SessionError::CorruptArchive(e.to_string()))?;
        Ok(session)
    }
}

#[derive(Serialize, Deserialize)]
struct Archive {
    schema_version: u32,
    created_at: DateTime<Utc>,
    target_index: usize,
    #[serde(default)]
    notes: String,
    exchanges: Vec<ArchivedExchange>,
}

#[derive(Serialize, Deserialize)]
struct ArchivedExchange {
    method: String,
    url: String,
    request_headers: Vec<Header>,
    request_body_b64: String,
    status: u16,
    response_headers: Vec<Header>,
    response_body_b64: String,
    sequence_no: u64,
}

impl From<&Exchange> for ArchivedExchange {
    fn from(e: &Exchange) -> Self {
        Self {
            method: e.method.clone(),
            url: e.url.clone(),
            request_headers: e.request_headers.clone(),
            request_body_b64: B64.encode(&e.request_body),
            status: e.status,
            response_headers: e.response_headers.clone(),
            response_body_b64: B64.encode(&e.response_body),
            sequence_no: e.sequence_no,
        }
    }
}

impl TryFrom<ArchivedExchange> for Exchange {
    type Error = SessionError;

    fn try_from(a: ArchivedExchange) -> Result<Self, Self::Error> {
        let decode = |field: &str, text: &str| {
            B64.decode(text)
                .map_err(|e| SessionError::CorruptArchive(format!("{field} of #{}: {e}", a.sequence_no)))
        };
        Ok(Self {
            request_body: decode("request_body_b64", &a.request_body_b64)?,
            response_body: decode("response_body_b64", &a.response_body_b64)?,
            method: a.method,
            url: a.url,
            request_headers: a.request_headers,
            status: a.status,
            response_headers: a.response_headers,
            sequence_no: a.sequence_no,
        })
    }
}

// ---- HAR 1.2 import ----

#[derive(Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Deserialize)]
struct HarLog {
    entries: Vec<HarEntry>,
}

#[derive(Deserialize)]
struct HarEntry {
    request: HarRequest,
    response: HarResponse,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarRequest {
    method: String,
    url: String,
    #[serde(default)]
    headers: Vec<Header>,
    post_data: Option<HarPostData>,
}

#[derive(Deserialize)]
struct HarPostData {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    encoding: Option<String>,
}

#[derive(Deserialize)]
struct HarResponse {
    status: u16,
    #[serde(default)]
    headers: Vec<Header>,
    content: HarContent,
}

#[derive(Deserialize)]
struct HarContent {
    #[serde(default)]
    size: Option<i64>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    encoding: Option<String>,
}

fn decode_har_text(text: &str, encoding: Option<&str>) -> Result<Vec<u8>, String> {
    match encoding {
        Some(enc) if enc.eq_ignore_ascii_case("base64") => {
            B64.decode(text.trim()).map_err(|e| format!("bad base64: {e}"))
        }
        _ => Ok(text.as_bytes().to_vec()),
    }
}

/// Converts a HAR 1.2 document into exchanges, one per entry in log order.
pub fn exchanges_from_har(document: &str) -> Result<Vec<Exchange>, SessionError> {
    let har: Har =
        serde_json::from_str(document).map_err(|e| SessionError::MalformedHar(e.to_string()))?;
    har.log
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            check_url(&entry.request.url)
                .map_err(|r| SessionError::MalformedHar(format!("entry {i}: {r}")))?;
            let content = entry.response.content;
            let response_body = match (&content.text, content.size) {
                (Some(text), _) => decode_har_text(text, content.encoding.as_deref())
                    .map_err(|r| SessionError::MalformedHar(format!("entry {i}: {r}")))?,
                (None, Some(0)) => Vec::new(),
                (None, _) => return Err(SessionError::MissingResponseContent(i)),
            };
            let request_body = match entry.request.post_data {
                Some(HarPostData { text: Some(text), encoding }) => {
                    decode_har_text(&text, encoding.as_deref())
                        .map_err(|r| SessionError::MalformedHar(format!("entry {i}: {r}")))?
                }
                _ => Vec::new(),
            };
            Ok(Exchange {
                method: entry.request.method.to_ascii_uppercase(),
                url: entry.request.url,
                request_headers: entry.request.headers,
                request_body,
                status: entry.response.status,
                response_headers: entry.response.headers,
                response_body,
                sequence_no: i as u64,
            })
        })
        .collect()
}

pub fn import_har(document: &str, target_matcher: &str) -> Result<RecordedSession, SessionError> {
    let exchanges = exchanges_from_har(document)?;
    RecordedSession::new(exchanges, target_matcher, "imported from HAR".to_string())
}
