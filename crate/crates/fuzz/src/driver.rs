//! Executes an interaction script in a browser session routed through a
//! proxy and captures the page serialization at S2.

use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use exposure_core::{Action, InteractionScript};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::webdriver::{BrowserSession, WebDriver, WebDriverError};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const POLL_INTERVAL: Duration = Duration::from_millis(100);

// The leading marker comment of each script names it; test browsers key on it.

pub const SERIALIZE_SCRIPT: &str = "/* exposure:serialize */
const xp = arguments[0];
if (!xp) { return {count: 1, html: document.documentElement.outerHTML}; }
const r = document.evaluate(xp, document, null, XPathResult.ORDERED_NODE_SNAPSHOT_TYPE, null);
if (r.snapshotLength !== 1) { return {count: r.snapshotLength, html: null}; }
return {count: 1, html: r.snapshotItem(0).outerHTML};";

pub const INSTALL_ERROR_HOOK_SCRIPT: &str = "/* exposure:install-error-hook */
if (!window.__xfErrors) {
  window.__xfErrors = [];
  window.addEventListener('error', function (e) { window.__xfErrors.push(String(e.message)); });
  window.addEventListener('unhandledrejection', function (e) {
    window.__xfErrors.push('unhandled rejection: ' + String(e.reason));
  });
}
return null;";

pub const COLLECT_ERRORS_SCRIPT: &str = "/* exposure:collect-errors */
return window.__xfErrors || [];";

pub const SHADOW_COUNT_SCRIPT: &str = "/* exposure:shadow-count */
let n = 0;
for (const el of document.querySelectorAll('*')) { if (el.shadowRoot) { n++; } }
return n;";

#[derive(Debug, Error)]
pub enum DriveError {
    #[error(transparent)]
    Driver(#[from] WebDriverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FailureReason {
    ElementNotFound { action_index: usize },
    StateNotReached { action_index: usize },
    AreaNotFound,
    AreaAmbiguous { matches: usize },
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ElementNotFound { action_index } => write!(f, "element not found at action {action_index}"),
            Self::StateNotReached { action_index } => write!(f, "state not reached at action {action_index}"),
            Self::AreaNotFound => f.write_str("area of interest not found"),
            Self::AreaAmbiguous { matches } => write!(f, "area of interest matched {matches} elements"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CampaignState {
    S0Initial,
    S1RequestSent,
    S2PageUpdated,
    Failed(FailureReason),
}

impl CampaignState {
    fn rank(&self) -> u8 {
        match self {
            Self::S0Initial => 0,
            Self::S1RequestSent => 1,
            Self::S2PageUpdated => 2,
            Self::Failed(_) => 3,
        }
    }

    /// Moves forward; backwards moves and leaving `Failed` are ignored.
    pub fn advance(&mut self, next: CampaignState) {
        let allowed = match (&*self, &next) {
            (Self::Failed(_), _) => false,
            (_, Self::Failed(_)) => true,
            (current, next) => next.rank() > current.rank(),
        };
        if allowed {
            *self = next;
        }
    }

    pub fn is_updated(&self) -> bool {
        matches!(self, Self::S2PageUpdated)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DriveOptions {
    /// Overrides the script's TIMEOUT directive when set.
    pub timeout_ms: Option<u64>,
    pub capture_on_timeout: bool,
    pub capabilities: Option<Value>,
}

impl DriveOptions {
    pub fn effective_timeout(&self, script: &InteractionScript) -> Duration {
        Duration::from_millis(self.timeout_ms.or(script.timeout_ms).unwrap_or(DEFAULT_TIMEOUT_MS))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriveResult {
    pub final_state: CampaignState,
    pub dom_html: Option<String>,
    pub client_errors: Vec<String>,
    pub wall_time_ms: u64,
    pub shadow_roots: u64,
}

/// Runs `script` in a fresh session whose HTTP traffic goes through
/// `127.0.0.1:proxy_port`.
pub fn drive(
    script: &InteractionScript,
    driver: &WebDriver,
    proxy_port: u16,
    options: &DriveOptions,
) -> Result<DriveResult, DriveError> {
    let started = Instant::now();
    let proxy = format!("127.0.0.1:{proxy_port}");
    let session = driver.new_session(Some(&proxy), options.capabilities.as_ref())?;
    let outcome = run_actions(&session, script, options);
    let result = outcome.and_then(|state| finish(&session, script, state, options));
    let closed = session.close();
    let mut result = result?;
    closed?;
    result.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

fn run_actions(
    session: &BrowserSession,
    script: &InteractionScript,
    options: &DriveOptions,
) -> Result<CampaignState, DriveError> {
    let timeout = options.effective_timeout(script);
    let trigger = script.request_trigger_index();
    let mut state = CampaignState::S0Initial;
    for (index, action) in script.actions.iter().enumerate() {
        match action {
            Action::Load { url } => {
                session.navigate(url)?;
                session.execute(INSTALL_ERROR_HOOK_SCRIPT, vec![])?;
            }
            Action::Input { selector, text } => match first(session, selector)? {
                Some(el) => session.send_keys(&el, text)?,
                None => return Ok(not_found(index)),
            },
            Action::Click { selector } => match first(session, selector)? {
                Some(el) => session.click(&el)?,
                None => return Ok(not_found(index)),
            },
            Action::Hover { selector } => match first(session, selector)? {
                Some(el) => session.hover(&el)?,
                None => return Ok(not_found(index)),
            },
            Action::WaitLocate { selector } => {
                if !wait_for(session, selector, timeout)? {
                    return Ok(CampaignState::Failed(FailureReason::StateNotReached { action_index: index }));
                }
            }
            Action::Sleep { ms } => thread::sleep(Duration::from_millis(*ms)),
            Action::Scroll { delta } => session.scroll(*delta)?,
            Action::Fuzz => {}
        }
        if Some(index) == trigger {
            state.advance(CampaignState::S1RequestSent);
        }
    }
    state.advance(CampaignState::S2PageUpdated);
    Ok(state)
}

fn not_found(action_index: usize) -> CampaignState {
    CampaignState::Failed(FailureReason::ElementNotFound { action_index })
}

fn first(session: &BrowserSession, selector: &str) -> Result<Option<crate::webdriver::ElementRef>, WebDriverError> {
    Ok(session.find_elements(selector)?.into_iter().next())
}

fn wait_for(session: &BrowserSession, selector: &str, timeout: Duration) -> Result<bool, WebDriverError> {
    let deadline = Instant::now() + timeout;
    loop {
        if !session.find_elements(selector)?.is_empty() {
            return Ok(true);
        }
        let now = Instant::now();
        if now >= deadline {
            return Ok(false);
        }
        thread::sleep(POLL_INTERVAL.min(deadline - now));
    }
}

fn finish(
    session: &BrowserSession,
    script: &InteractionScript,
    mut state: CampaignState,
    options: &DriveOptions,
) -> Result<DriveResult, DriveError> {
    let client_errors = collect_errors(session)?;
    let shadow_roots = session.execute(SHADOW_COUNT_SCRIPT, vec![])?.as_u64().unwrap_or(0);
    let capture = match &state {
        CampaignState::S2PageUpdated => true,
        CampaignState::Failed(FailureReason::StateNotReached { .. }) => options.capture_on_timeout,
        _ => false,
    };
    let mut dom_html = None;
    if capture {
        match extract_dom(session, script.area_of_interest.as_deref())? {
            Ok(html) => dom_html = Some(html),
            Err(reason) => state.advance(CampaignState::Failed(reason)),
        }
    }
    Ok(DriveResult {
        final_state: state,
        dom_html,
        client_errors,
        wall_time_ms: 0,
        shadow_roots,
    })
}

fn collect_errors(session: &BrowserSession) -> Result<Vec<String>, WebDriverError> {
    let value = session.execute(COLLECT_ERRORS_SCRIPT, vec![])?;
    Ok(value
        .as_array()
        .map(|list| {
            list.iter()
                .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
                .collect()
        })
        .unwrap_or_default())
}

/// Outer HTML of the document element, or of the single element matched by
/// `area`. The inner result reports area-of-interest failures.
pub fn extract_dom(
    session: &BrowserSession,
    area: Option<&str>,
) -> Result<Result<String, FailureReason>, WebDriverError> {
    let arg = area.map_or(Value::Null, |a| json!(a));
    let value = session.execute(SERIALIZE_SCRIPT, vec![arg])?;
    let count = value.get("count").and_then(Value::as_u64).unwrap_or(0) as usize;
    let html = value.get("html").and_then(Value::as_str);
    Ok(match (count, html) {
        (1, Some(html)) => Ok(html.to_string()),
        (0, _) => Err(FailureReason::AreaNotFound),
        (1, None) => {
            return Err(WebDriverError::Malformed("serialization returned no html".into()));
        }
        (n, _) => Err(FailureReason::AreaAmbiguous { matches: n }),
    })
}
