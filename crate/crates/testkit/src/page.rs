//! Page state of one browser session: the DOM, pending timers, event
//! handlers and collected page errors.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::Value;
use url::Url;

use crate::apps;
use crate::dom::{Dom, NodeData, NodeId};
use crate::net::{fetch, FetchResponse};
use crate::xpath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Click,
    MouseOver,
}

pub type Handler = Arc<dyn Fn(&mut Page, NodeId) + Send + Sync>;
type Task = Box<dyn FnOnce(&mut Page) + Send>;

pub struct Page {
    pub dom: Dom,
    pub url: Option<Url>,
    pub generation: u64,
    pub scroll_y: i64,
    proxy: Option<String>,
    errors: Vec<String>,
    error_hook: bool,
    inputs: HashMap<NodeId, String>,
    handlers: Vec<(NodeId, Event, Handler)>,
    tasks: Vec<(Instant, u64, Task)>,
    task_seq: u64,
    /// Every URL this page requested, in order.
    pub requested: Vec<String>,
}

impl Page {
    pub fn new(proxy: Option<String>) -> Self {
        Self {
            dom: Dom::new(),
            url: None,
            generation: 0,
            scroll_y: 0,
            proxy,
            errors: Vec::new(),
            error_hook: false,
            inputs: HashMap::new(),
            handlers: Vec::new(),
            tasks: Vec::new(),
            task_seq: 0,
            requested: Vec::new(),
        }
    }

    /// Loads a document and its subresources, then starts the page app
    /// named by the marker in its script.
    pub fn navigate(&mut self, url: &str) -> Result<(), String> {
        let url = Url::parse(url).map_err(|e| format!("invalid URL {url}: {e}"))?;
        self.dom = Dom::new();
        self.generation += 1;
        self.scroll_y = 0;
        self.errors.clear();
        self.error_hook = false;
        self.inputs.clear();
        self.handlers.clear();
        self.tasks.clear();
        let response = self.request("GET", &url, &[]).map_err(|e| format!("navigation to {url} failed: {e}"))?;
        self.url = Some(url);
        self.dom = Dom::parse(&String::from_utf8_lossy(&response.body));
        let mut app_names = Vec::new();
        for node in self.dom.preorder() {
            let reference = match self.dom.tag(node) {
                Some("script") => self.dom.attr(node, "src"),
                Some("link") if self.dom.attr(node, "rel") == Some("stylesheet") => self.dom.attr(node, "href"),
                Some("img") => self.dom.attr(node, "src"),
                _ => None,
            };
            let Some(reference) = reference.map(str::to_string) else { continue };
            let is_script = self.dom.tag(node) == Some("script");
            match self.fetch(&reference) {
                Ok(r) if is_script && r.status == 200 => {
                    if let Some(name) = apps::marker(&String::from_utf8_lossy(&r.body)) {
                        app_names.push(name);
                    }
                }
                Ok(_) => {}
                Err(e) => self.throw(e),
            }
        }
        for name in app_names {
            match apps::lookup(&name) {
                Some(app) => app(self),
                None => self.throw(format!("ReferenceError: unknown app {name}")),
            }
        }
        Ok(())
    }

    fn request(&mut self, method: &str, url: &Url, body: &[u8]) -> std::io::Result<FetchResponse> {
        self.requested.push(url.to_string());
        fetch(self.proxy.as_deref(), method, url, body)
    }

    pub fn resolve(&self, reference: &str) -> Result<Url, String> {
        match &self.url {
            Some(base) => base.join(reference),
            None => Url::parse(reference),
        }
        .map_err(|e| format!("TypeError: invalid URL {reference}: {e}"))
    }

    /// Issues a GET for a page-relative URL.
    pub fn fetch(&mut self, reference: &str) -> Result<FetchResponse, String> {
        let url = self.resolve(reference)?;
        self.request("GET", &url, &[])
            .map_err(|e| format!("TypeError: NetworkError when attempting to fetch resource {url}: {e}"))
    }

    /// `fetch(url).then(r => r.json())`: any failure becomes the message a
    /// browser would report.
    pub fn fetch_json(&mut self, reference: &str) -> Result<Value, String> {
        let response = self.fetch(reference)?;
        serde_json::from_slice(&response.body).map_err(|e| {
            if response.body.is_empty() {
                "SyntaxError: Unexpected end of JSON input".to_string()
            } else {
                format!("SyntaxError: JSON.parse: {e}")
            }
        })
    }

    pub fn later(&mut self, delay_ms: u64, task: impl FnOnce(&mut Page) + Send + 'static) {
        self.task_seq += 1;
        self.tasks
            .push((Instant::now() + Duration::from_millis(delay_ms), self.task_seq, Box::new(task)));
    }

    /// Runs every timer that is due, earliest first.
    pub fn run_due(&mut self) {
        loop {
            let now = Instant::now();
            let next = self
                .tasks
                .iter()
                .enumerate()
                .filter(|(_, (due, _, _))| *due <= now)
                .min_by_key(|(_, (due, seq, _))| (*due, *seq))
                .map(|(i, _)| i);
            let Some(i) = next else { return };
            let (_, _, task) = self.tasks.swap_remove(i);
            task(self);
        }
    }

    pub fn on(&mut self, node: NodeId, event: Event, handler: Handler) {
        self.handlers.push((node, event, handler));
    }

    /// Dispatches an event to handlers on the node and its ancestors.
    pub fn dispatch(&mut self, node: NodeId, event: Event) {
        let path = self.dom.ancestors_inclusive(node);
        let matching: Vec<Handler> = path
            .iter()
            .flat_map(|n| {
                self.handlers
                    .iter()
                    .filter(move |(h, e, _)| h == n && *e == event)
                    .map(|(_, _, f)| Arc::clone(f))
            })
            .collect();
        for handler in matching {
            handler(self, node);
        }
    }

    /// Records an uncaught page error; only visible once the error hook has
    /// been installed, as with a real `window.onerror` listener.
    pub fn throw(&mut self, message: String) {
        if self.error_hook {
            self.errors.push(message);
        }
    }

    pub fn install_error_hook(&mut self) {
        self.error_hook = true;
    }

    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    pub fn type_into(&mut self, node: NodeId, text: &str) {
        self.inputs.entry(node).or_default().push_str(text);
    }

    pub fn input_value(&self, node: NodeId) -> String {
        self.inputs
            .get(&node)
            .cloned()
            .or_else(|| self.dom.attr(node, "value").map(str::to_string))
            .unwrap_or_default()
    }

    pub fn find(&self, expr: &str) -> Result<Vec<NodeId>, String> {
        xpath::evaluate(&self.dom, expr)
    }

    pub fn shadow_root_count(&self) -> usize {
        self.dom
            .preorder()
            .into_iter()
            .filter(|&n| self.dom.node(n).shadow_root)
            .count()
    }

    /// Creates `<tag attrs>text</tag>`; an empty text adds no text node.
    pub fn element(&mut self, tag: &str, attrs: &[(&str, &str)], text: &str) -> NodeId {
        let el = self.dom.create_element(tag, attrs);
        if !text.is_empty() {
            let t = self.dom.create_text(text);
            self.dom.append(el, t);
        }
        el
    }

    pub fn append(&mut self, parent: NodeId, child: NodeId) {
        self.dom.append(parent, child);
    }

    pub fn by_id(&self, id: &str) -> Result<NodeId, String> {
        self.dom
            .element_by_id(id)
            .ok_or_else(|| format!("TypeError: document.getElementById('{id}') is null"))
    }

    pub fn is_element(&self, node: NodeId) -> bool {
        matches!(self.dom.node(node).data, NodeData::Element { .. })
    }
}
