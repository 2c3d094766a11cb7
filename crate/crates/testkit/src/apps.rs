//! Client behaviours of the fixture pages. A page's `app.js` carries a
//! `testkit-app: <name>` marker; the browser runs the matching function
//! after the document and its subresources have loaded.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde_json::Value;

use crate::page::{Event, Page};

/// Delay between a response arriving and the page updating.
pub const RENDER_DELAY_MS: u64 = 25;

type App = fn(&mut Page);

pub fn marker(script: &str) -> Option<String> {
    let start = script.find("testkit-app:")? + "testkit-app:".len();
    let name: String = script[start..]
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-')
        .collect();
    (!name.is_empty()).then_some(name)
}

pub fn lookup(name: &str) -> Option<App> {
    let app: App = match name {
        "basic" => |p| profile(p, Variant::Plain),
        "random-attr" => |p| profile(p, Variant::RandomClass),
        "random-attr-fixed" => |p| profile(p, Variant::FixedClass),
        "clock" => |p| profile(p, Variant::Clock),
        "clock-fixed" => |p| profile(p, Variant::FixedClock),
        "banner" => |p| profile(p, Variant::Banner),
        "token" => |p| profile(p, Variant::Token),
        "shadow" => |p| profile(p, Variant::Shadow),
        "client-error" => |p| profile(p, Variant::StrictEmail),
        "arrays" => arrays,
        "fallback-group" => fallback_group,
        "sentinel" => sentinel,
        _ => return None,
    };
    Some(app)
}

// JavaScript property access: reading from `undefined` throws.
fn prop<'a>(value: Option<&'a Value>, key: &str) -> Result<Option<&'a Value>, String> {
    match value {
        Some(Value::Object(map)) => Ok(map.get(key)),
        Some(_) => Ok(None),
        None => Err(format!("TypeError: Cannot read properties of undefined (reading '{key}')")),
    }
}

fn index(value: Option<&Value>, i: usize) -> Result<Option<&Value>, String> {
    match value {
        Some(Value::Array(items)) => Ok(items.get(i)),
        Some(_) => Ok(None),
        None => Err(format!("TypeError: Cannot read properties of undefined (reading '{i}')")),
    }
}

/// String conversion as in a template literal.
fn js(value: Option<&Value>) -> String {
    match value {
        None => "undefined".into(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) => "null".into(),
        Some(Value::Array(items)) => items.iter().map(|v| js(Some(v))).collect::<Vec<_>>().join(","),
        Some(Value::Object(_)) => "[object Object]".into(),
        Some(other) => other.to_string(),
    }
}

fn number(value: Option<&Value>) -> f64 {
    value.and_then(Value::as_f64).unwrap_or(f64::NAN)
}

/// Fetches `url` now and hands the parsed body to `render` after the
/// render delay. Failures surface as page errors.
fn fetch_then(page: &mut Page, url: &str, render: fn(&mut Page, &Value) -> Result<(), String>) {
    let response = page.fetch_json(url);
    page.later(RENDER_DELAY_MS, move |p| {
        if let Err(e) = response.and_then(|data| render(p, &data)) {
            p.throw(e);
        }
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Plain,
    RandomClass,
    FixedClass,
    Clock,
    FixedClock,
    Banner,
    Token,
    Shadow,
    StrictEmail,
}

static LAST_BANNER_COUNT: AtomicUsize = AtomicUsize::new(usize::MAX);

fn profile(page: &mut Page, variant: Variant) {
    if variant == Variant::Token {
        let token: u64 = rand::thread_rng().gen();
        // Not awaited; the page renders whatever this returns.
        let _ = page.fetch(&format!("/api/config?token={token:016x}"));
    }
    let response = page.fetch_json("/api/profile");
    page.later(RENDER_DELAY_MS, move |p| {
        if let Err(e) = response.and_then(|data| render_profile(p, &data, variant)) {
            p.throw(e);
        }
    });
}

fn render_profile(p: &mut Page, data: &Value, variant: Variant) -> Result<(), String> {
    let user = prop(Some(data), "user")?;
    let name = js(prop(user, "name")?);
    let suburb = js(prop(prop(user, "address")?, "suburb")?);
    let tier = js(prop(prop(Some(data), "plan")?, "tier")?);
    if variant == Variant::StrictEmail {
        // `user.email.toLowerCase()`
        if prop(user, "email")?.is_none() {
            return Err("TypeError: Cannot read properties of undefined (reading 'toLowerCase')".into());
        }
    }
    let class = match variant {
        Variant::RandomClass => format!("card c-{:08x}", rand::thread_rng().gen::<u32>()),
        Variant::FixedClass => "card c-00000000".into(),
        _ => "card".into(),
    };
    let app = p.by_id("app")?;
    let card = p.element("div", &[("id", "profile"), ("class", &class)], "");
    for (tag, cls, text) in [("h1", "name", name), ("p", "suburb", suburb), ("p", "tier", format!("Tier: {tier}"))] {
        let el = p.element(tag, &[("class", cls)], &text);
        p.append(card, el);
    }
    let clock = match variant {
        Variant::Clock => {
            let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
            Some(format!("Rendered at {nanos}"))
        }
        Variant::FixedClock => Some("Rendered at 0".into()),
        _ => None,
    };
    if let Some(text) = clock {
        let el = p.element("p", &[("class", "clock")], &text);
        p.append(card, el);
    }
    p.append(app, card);
    match variant {
        Variant::Banner => {
            let previous = LAST_BANNER_COUNT.load(Ordering::SeqCst);
            let mut count = rand::thread_rng().gen_range(0..50);
            if count == previous {
                count = (count + 1) % 50;
            }
            LAST_BANNER_COUNT.store(count, Ordering::SeqCst);
            for i in 0..count {
                let ad = p.element("div", &[("class", "ad")], &format!("Sponsored {i}"));
                p.append(app, ad);
            }
        }
        Variant::Shadow => {
            let widget = p.element("div", &[("id", "widget")], "");
            p.dom.attach_shadow(widget);
            p.append(app, widget);
        }
        _ => {}
    }
    Ok(())
}

fn arrays(page: &mut Page) {
    let Ok(button) = page.find("//span[text()='Check availability']") else { return };
    let Some(&button) = button.first() else { return };
    page.on(
        button,
        Event::Click,
        Arc::new(|p, _| {
            let postcode = p.by_id("postcode").map(|n| p.input_value(n)).unwrap_or_default();
            fetch_then(p, &format!("/api/v2/stock/get?postcode={postcode}"), render_stock);
        }),
    );
}

fn render_stock(p: &mut Page, data: &Value) -> Result<(), String> {
    let stores = match prop(Some(data), "stores")? {
        Some(Value::Array(items)) => items.clone(),
        _ => return Err("TypeError: data.stores.forEach is not a function".into()),
    };
    let container = p.by_id("stock-info")?;
    p.dom.remove_children(container);
    for store in &stores {
        let name = js(prop(Some(store), "name")?);
        let available = prop(index(prop(Some(store), "products")?, 0)?, "available")?;
        let status = if number(available) > 0.0 { "available" } else { "unavailable" };
        let row = p.element("div", &[("class", "store")], "");
        let name_el = p.element("span", &[("class", "name")], &name);
        let status_el = p.element("span", &[("class", "status")], status);
        p.append(row, name_el);
        p.append(row, status_el);
        p.append(container, row);
    }
    Ok(())
}

fn fallback_group(page: &mut Page) {
    fetch_then(page, "/api/home", |p, data| {
        let store = js(prop(prop(Some(data), "store")?, "name")?);
        let promo = prop(Some(data), "promo")?;
        let none_left = ["title", "code", "banner_id"]
            .iter()
            .map(|k| prop(promo, k))
            .collect::<Result<Vec<_>, _>>()?
            .iter()
            .all(Option::is_none);
        let app = p.by_id("app")?;
        let home = p.element("div", &[("id", "home")], "");
        let heading = p.element("h1", &[], &store);
        let area = p.element("div", &[("id", "promo")], "");
        if none_left {
            let message = p.element("p", &[], "No current promotions");
            p.append(area, message);
        }
        p.append(home, heading);
        p.append(home, area);
        p.append(app, home);
        Ok(())
    });
}

fn sentinel(page: &mut Page) {
    fetch_then(page, "/api/search", |p, data| {
        if prop(Some(data), "status")?.is_none() {
            return Ok(());
        }
        let title = js(prop(index(prop(Some(data), "results")?, 0)?, "title")?);
        let app = p.by_id("app")?;
        let result = p.element("div", &[("id", "result")], "");
        let heading = p.element("h2", &[], &title);
        p.append(result, heading);
        p.append(app, result);
        Ok(())
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers() {
        assert_eq!(marker("/* testkit-app: arrays */").as_deref(), Some("arrays"));
        assert_eq!(marker("console.log(1)"), None);
        assert!(lookup("fallback-group").is_some());
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn js_semantics() {
        let v: Value = serde_json::json!({"a": {"b": 3}, "s": "x", "n": null});
        assert_eq!(js(prop(Some(&v), "s").unwrap()), "x");
        assert_eq!(js(prop(Some(&v), "missing").unwrap()), "undefined");
        assert_eq!(js(prop(Some(&v), "n").unwrap()), "null");
        assert!(prop(prop(Some(&v), "missing").unwrap(), "x").is_err());
        assert!(number(None).partial_cmp(&0.0).is_none());
        assert_eq!(number(prop(prop(Some(&v), "a").unwrap(), "b").unwrap()), 3.0);
    }
}
