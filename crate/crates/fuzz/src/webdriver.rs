//! Minimal blocking client for the W3C WebDriver protocol.

use std::time::Duration;

use serde_json::{json, Map, Value};
use thiserror::Error;

pub const ELEMENT_KEY: &str = "element-6066-11e4-a52f-4d65726c4944";

#[derive(Debug, Error)]
pub enum WebDriverError {
    #[error("WebDriver endpoint {endpoint} unreachable: {reason}")]
    Unreachable { endpoint: String, reason: String },
    #[error("no such element")]
    NoSuchElement,
    #[error("WebDriver error `{error}` (HTTP {status}): {message}")]
    Protocol {
        status: u16,
        error: String,
        message: String,
    },
    #[error("malformed WebDriver response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementRef(pub String);

#[derive(Clone)]
pub struct WebDriver {
    agent: ureq::Agent,
    endpoint: String,
}

impl WebDriver {
    pub fn new(endpoint: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout_read(Duration::from_secs(300))
            .build();
        Self {
            agent,
            endpoint: endpoint.trim_end_matches('/').to_string(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn call(&self, method: &str, path: &str, body: Option<Value>) -> Result<Value, WebDriverError> {
        let url = format!("{}{}", self.endpoint, path);
        let request = self.agent.request(method, &url);
        let result = match body {
            Some(body) => request.send_json(body),
            None => request.call(),
        };
        let (status, response) = match result {
            Ok(r) => (r.status(), r),
            Err(ureq::Error::Status(code, r)) => (code, r),
            Err(ureq::Error::Transport(t)) => {
                return Err(WebDriverError::Unreachable {
                    endpoint: self.endpoint.clone(),
                    reason: t.to_string(),
                })
            }
        };
        let text = response
            .into_string()
            .map_err(|e| WebDriverError::Malformed(e.to_string()))?;
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| WebDriverError::Malformed(format!("{e}: {text}")))?;
        let value = parsed.get("value").cloned().unwrap_or(Value::Null);
        if status >= 400 {
            let error = value.get("error").and_then(Value::as_str).unwrap_or("unknown error");
            if error == "no such element" {
                return Err(WebDriverError::NoSuchElement);
            }
            return Err(WebDriverError::Protocol {
                status,
                error: error.to_string(),
                message: value.get("message").and_then(Value::as_str).unwrap_or_default().to_string(),
            });
        }
        Ok(value)
    }

    /// Opens a browser session. With `proxy` set, all plaintext HTTP goes
    /// through that `host:port`. Extra capabilities are merged into
    /// `alwaysMatch`.
    pub fn new_session(&self, proxy: Option<&str>, extra: Option<&Value>) -> Result<BrowserSession, WebDriverError> {
        let mut always = Map::new();
        if let Some(Value::Object(extra)) = extra {
            always.extend(extra.clone());
        }
        if let Some(proxy) = proxy {
            always.insert(
                "proxy".into(),
                json!({"proxyType": "manual", "httpProxy": proxy, "noProxy": []}),
            );
        }
        let value = self.call("POST", "/session", Some(json!({"capabilities": {"alwaysMatch": always}})))?;
        let id = value
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| WebDriverError::Malformed("new session response lacks sessionId".into()))?;
        Ok(BrowserSession {
            driver: self.clone(),
            id: id.to_string(),
            closed: false,
        })
    }
}

/// One browser session; deleted on drop if not closed explicitly.
pub struct BrowserSession {
    driver: WebDriver,
    id: String,
    closed: bool,
}

impl BrowserSession {
    pub fn id(&self) -> &str {
        &self.id
    }

    fn call(&self, method: &str, path: &str, body: Option<Value>) -> Result<Value, WebDriverError> {
        self.driver.call(method, &format!("/session/{}{}", self.id, path), body)
    }

    pub fn navigate(&self, url: &str) -> Result<(), WebDriverError> {
        self.call("POST", "/url", Some(json!({"url": url}))).map(drop)
    }

    pub fn find_elements(&self, xpath: &str) -> Result<Vec<ElementRef>, WebDriverError> {
        let value = self.call("POST", "/elements", Some(json!({"using": "xpath", "value": xpath})))?;
        let list = value
            .as_array()
            .ok_or_else(|| WebDriverError::Malformed("find elements did not return a list".into()))?;
        list.iter().map(element_ref).collect()
    }

    pub fn find_element(&self, xpath: &str) -> Result<ElementRef, WebDriverError> {
        let value = self.call("POST", "/element", Some(json!({"using": "xpath", "value": xpath})))?;
        element_ref(&value)
    }

    pub fn click(&self, element: &ElementRef) -> Result<(), WebDriverError> {
        self.call("POST", &format!("/element/{}/click", element.0), Some(json!({})))
            .map(drop)
    }

    pub fn send_keys(&self, element: &ElementRef, text: &str) -> Result<(), WebDriverError> {
        self.call("POST", &format!("/element/{}/value", element.0), Some(json!({"text": text})))
            .map(drop)
    }

    pub fn hover(&self, element: &ElementRef) -> Result<(), WebDriverError> {
        let origin = json!({ ELEMENT_KEY: element.0 });
        self.perform(json!([{
            "type": "pointer",
            "id": "mouse",
            "parameters": {"pointerType": "mouse"},
            "actions": [{"type": "pointerMove", "duration": 0, "origin": origin, "x": 0, "y": 0}]
        }]))
    }

    pub fn scroll(&self, delta_y: i64) -> Result<(), WebDriverError> {
        self.perform(json!([{
            "type": "wheel",
            "id": "wheel",
            "actions": [{"type": "scroll", "origin": "viewport", "x": 0, "y": 0,
                         "deltaX": 0, "deltaY": delta_y, "duration": 0}]
        }]))
    }

    fn perform(&self, actions: Value) -> Result<(), WebDriverError> {
        self.call("POST", "/actions", Some(json!({ "actions": actions }))).map(drop)
    }

    pub fn execute(&self, script: &str, args: Vec<Value>) -> Result<Value, WebDriverError> {
        self.call("POST", "/execute/sync", Some(json!({"script": script, "args": args})))
    }

    pub fn close(mut self) -> Result<(), WebDriverError> {
        self.closed = true;
        self.call("DELETE", "", None).map(drop)
    }
}

impl Drop for BrowserSession {
    fn drop(&mut self) {
        if !self.closed {
            let _ = self.call("DELETE", "", None);
        }
    }
}

fn element_ref(value: &Value) -> Result<ElementRef, WebDriverError> {
    value
        .get(ELEMENT_KEY)
        .and_then(Value::as_str)
        .map(|s| ElementRef(s.to_string()))
        .ok_or_else(|| WebDriverError::Malformed(format!("not an element reference: {value}")))
}
