//! The interaction-script DSL.
//!
//! A script is a line-oriented document with one directive per line:
//!
//! ```text
//! TARGET /api/v2/stock/get
//!
//! LOAD https://www.example.com/path/page
//! INPUT //input[@id="text-postcode"] 3000
//! CLICK //span[text()='Check availability']
//! WAIT_LOCATE //div[@id="stock-info"]/div[2]
//! FUZZ
//! ```
//!
//! `TARGET`, `AREA` and `TIMEOUT` are header directives and may appear
//! anywhere; every other directive is an [`Action`] and keeps its source
//! order. Blank lines and lines starting with `#` are ignored.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("script has no TARGET directive")]
    MissingTarget,
    #[error("script has no FUZZ marker")]
    MissingFuzzMarker,
    #[error("line {line}: TARGET declared more than once")]
    DuplicateTarget { line: usize },
    #[error("line {line}: FUZZ declared more than once")]
    DuplicateFuzzMarker { line: usize },
    #[error("line {line}: {directive} declared more than once")]
    DuplicateHeader { line: usize, directive: &'static str },
    #[error("line {line}: FUZZ must follow at least one LOAD")]
    FuzzBeforeLoad { line: usize },
    #[error("line {line}: malformed argument: {reason}")]
    MalformedArgument { line: usize, reason: String },
}

/// One browser interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Load { url: String },
    Input { selector: String, text: String },
    Click { selector: String },
    WaitLocate { selector: String },
    Hover { selector: String },
    Sleep { ms: u64 },
    Scroll { delta: i64 },
    Fuzz,
}

impl Action {
    pub fn keyword(&self) -> &'static str {
        match self {
            Action::Load { .. } => "LOAD",
            Action::Input { .. } => "INPUT",
            Action::Click { .. } => "CLICK",
            Action::WaitLocate { .. } => "WAIT_LOCATE",
            Action::Hover { .. } => "HOVER",
            Action::Sleep { .. } => "SLEEP",
            Action::Scroll { .. } => "SCROLL",
            Action::Fuzz => "FUZZ",
        }
    }

    pub fn selector(&self) -> Option<&str> {
        match self {
            Action::Input { selector, .. }
            | Action::Click { selector }
            | Action::WaitLocate { selector }
            | Action::Hover { selector } => Some(selector),
            _ => None,
        }
    }

    /// Actions that only observe or pass time; they never trigger requests.
    pub fn is_passive(&self) -> bool {
        matches!(
            self,
            Action::WaitLocate { .. } | Action::Sleep { .. } | Action::Fuzz
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Load { url } => write!(f, "LOAD {url}"),
            Action::Input { selector, text } => write!(f, "INPUT {selector} {text}"),
            Action::Click { selector } => write!(f, "CLICK {selector}"),
            Action::WaitLocate { selector } => write!(f, "WAIT_LOCATE {selector}"),
            Action::Hover { selector } => write!(f, "HOVER {selector}"),
            Action::Sleep { ms } => write!(f, "SLEEP {ms}"),
            Action::Scroll { delta } => write!(f, "SCROLL {delta}"),
            Action::Fuzz => f.write_str("FUZZ"),
        }
    }
}

/// A parsed script: the target API matcher plus the ordered actions that
/// take the client from its initial state to the updated page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionScript {
    pub target_matcher: String,
    pub actions: Vec<Action>,
    pub area_of_interest: Option<String>,
    pub timeout_ms: Option<u64>,
}

impl InteractionScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        parse_script(text)
    }

    pub fn fuzz_index(&self) -> Option<usize> {
        self.actions.iter().position(|a| *a == Action::Fuzz)
    }

    /// Index of the last action that can trigger the target request.
    ///
    /// The run is considered to have sent the request once every action up
    /// to and including this one has completed; the trailing block of waits
    /// and sleeps detects the page update.
    pub fn request_trigger_index(&self) -> Option<usize> {
        self.actions.iter().rposition(|a| !a.is_passive())
    }

    /// Checks the invariants a parsed script always satisfies.
    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.target_matcher.trim().is_empty() || has_line_break(&self.target_matcher) {
            return Err(ScriptError::MissingTarget);
        }
        let mut seen_load = false;
        let mut seen_fuzz = false;
        for (i, action) in self.actions.iter().enumerate() {
            let line = i + 1;
            let malformed = |reason: &str| ScriptError::MalformedArgument {
                line,
                reason: reason.to_string(),
            };
            if let Some(sel) = action.selector() {
                if sel.trim().is_empty() || sel.trim() != sel || has_line_break(sel) {
                    return Err(malformed("selector must be a non-empty single-line string"));
                }
            }
            match action {
                Action::Load { url } => {
                    check_absolute_url(url).map_err(|r| malformed(&r))?;
                    seen_load = true;
                }
                Action::Input { selector, text } => {
                    if split_selector(selector).1.is_some() {
                        return Err(malformed("INPUT selector contains top-level whitespace"));
                    }
                    if text.is_empty() || text.trim() != text || has_line_break(text) {
                        return Err(malformed("INPUT text must be non-empty and trimmed"));
                    }
                }
                Action::Fuzz => {
                    if seen_fuzz {
                        return Err(ScriptError::DuplicateFuzzMarker { line });
                    }
                    if !seen_load {
                        return Err(ScriptError::FuzzBeforeLoad { line });
                    }
                    seen_fuzz = true;
                }
                _ => {}
            }
        }
        if !seen_fuzz {
            return Err(ScriptError::MissingFuzzMarker);
        }
        if let Some(area) = &self.area_of_interest {
            if area.trim().is_empty() || area.trim() != area || has_line_break(area) {
                return Err(ScriptError::MalformedArgument {
                    line: 0,
                    reason: "AREA selector must be a non-empty single-line string".into(),
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        serialize_script(self)
    }
}

fn has_line_break(s: &str) -> bool {
    s.contains(['\n', '\r'])
}

fn check_absolute_url(raw: &str) -> Result<(), String> {
    match url::Url::parse(raw) {
        Ok(u) if u.has_host() => Ok(()),
        Ok(_) => Err(format!("`{raw}` has no host")),
        Err(e) => Err(format!("`{raw}` is not an absolute URL: {e}")),
    }
}

/// Splits an XPath selector off the front of `rest`.
///
/// The selector ends at the first whitespace that is outside brackets,
/// parentheses and quotes, so `//span[text()='Check availability']` stays in
/// one piece.
fn split_selector(rest: &str) -> (&str, Option<&str>) {
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    for (i, c) in rest.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"') => quote = Some(c),
            (None, '[' | '(') => depth += 1,
            (None, ']' | ')') => depth -= 1,
            (None, c) if c.is_whitespace() && depth <= 0 => {
                let tail = rest[i..].trim();
                return (&rest[..i], (!tail.is_empty()).then_some(tail));
            }
            _ => {}
        }
    }
    (rest, None)
}

pub fn parse_script(text: &str) -> Result<InteractionScript, ScriptError> {
    let mut target: Option<String> = None;
    let mut area: Option<String> = None;
    let mut timeout: Option<u64> = None;
    let mut actions = Vec::new();
    let mut fuzz_seen = false;
    let mut load_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (keyword, rest) = match trimmed.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (trimmed, ""),
        };
        let malformed = |reason: String| ScriptError::MalformedArgument { line, reason };
        let need_arg = |what: &str| -> Result<String, ScriptError> {
            if rest.is_empty() {
                Err(malformed(format!("{keyword} requires {what}")))
            } else {
                Ok(rest.to_string())
            }
        };

        let action = match keyword {
            "TARGET" => {
                if target.is_some() {
                    return Err(ScriptError::DuplicateTarget { line });
                }
                target = Some(need_arg("a URL path pattern")?);
                continue;
            }
            "AREA" => {
                if area.is_some() {
                    return Err(ScriptError::DuplicateHeader { line, directive: "AREA" });
                }
                area = Some(need_arg("an XPath selector")?);
                continue;
            }
            "TIMEOUT" => {
                if timeout.is_some() {
                    return Err(ScriptError::DuplicateHeader { line, directive: "TIMEOUT" });
                }
                let arg = need_arg("a duration in milliseconds")?;
                timeout = Some(
                    arg.parse()
                        .map_err(|_| malformed(format!("`{arg}` is not a millisecond count")))?,
                );
                continue;
            }
            "LOAD" => {
                let url = need_arg("an absolute URL")?;
                check_absolute_url(&url).map_err(malformed)?;
                load_seen = true;
                Action::Load { url }
            }
            "INPUT" => {
                let (selector, text) = split_selector(rest);
                if selector.is_empty() {
                    return Err(malformed("INPUT requires a selector".into()));
                }
                let text = text.ok_or_else(|| malformed("INPUT requires text after the selector".into()))?;
                Action::Input {
                    selector: selector.to_string(),
                    text: text.to_string(),
                }
            }
            "CLICK" => Action::Click { selector: need_arg("an XPath selector")? },
            "HOVER" => Action::Hover { selector: need_arg("an XPath selector")? },
            "WAIT_LOCATE" => Action::WaitLocate { selector: need_arg("an XPath selector")? },
            "SLEEP" => {
                let arg = need_arg("a duration in milliseconds")?;
                let ms = arg
                    .parse()
                    .map_err(|_| malformed(format!("`{arg}` is not a non-negative integer")))?;
                Action::Sleep { ms }
            }
            "SCROLL" => {
                let arg = need_arg("a signed pixel delta")?;
                let delta = arg
                    .parse()
                    .map_err(|_| malformed(format!("`{arg}` is not a signed integer")))?;
                Action::Scroll { delta }
            }
            "FUZZ" => {
                if !rest.is_empty() {
                    return Err(malformed("FUZZ takes no arguments".into()));
                }
                if fuzz_seen {
                    return Err(ScriptError::DuplicateFuzzMarker { line });
                }
                if !load_seen {
                    return Err(ScriptError::FuzzBeforeLoad { line });
                }
                fuzz_seen = true;
                Action::Fuzz
            }
            other => {
                return Err(ScriptError::UnknownDirective {
                    line,
                    directive: other.to_string(),
                })
            }
        };
        actions.push(action);
    }

    let target_matcher = target.ok_or(ScriptError::MissingTarget)?;
    if !fuzz_seen {
        return Err(ScriptError::MissingFuzzMarker);
    }
    Ok(InteractionScript {
        target_matcher,
        actions,
        area_of_interest: area,
        timeout_ms: timeout,
    })
}

pub fn serialize_script(script: &InteractionScript) -> String {
    let mut out = format!("TARGET {}\n", script.target_matcher);
    if let Some(area) = &script.area_of_interest {
        out.push_str(&format!("AREA {area}\n"));
    }
    if let Some(ms) = script.timeout_ms {
        out.push_str(&format!("TIMEOUT {ms}\n"));
    }
    out.push('\n');
    for action in &script.actions {
        out.push_str(&action.to_string());
        out.push('\n');
    }
    out
}

impl fmt::Display for InteractionScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_script(self))
    }
}

impl std::str::FromStr for InteractionScript {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_script(s)
    }
}
