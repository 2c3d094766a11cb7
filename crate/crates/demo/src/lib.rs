//! WebAssembly bindings for the static demo page in `www/`. Each export
//! takes and returns strings; results are JSON.

use exposure_core::dom::{build_ignore_mask, compare, parse_html, IgnoreMask};
use exposure_core::{ApiResponseTree, FieldPath, InteractionScript};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn pretty(value: Value) -> String {
    serde_json::to_string_pretty(&value).expect("JSON value serializes")
}

/// Parses an interaction script and reports where the request is triggered.
pub fn script_summary(text: &str) -> Result<String, String> {
    let script = InteractionScript::parse(text).map_err(|e| e.to_string())?;
    let trigger = script.request_trigger_index();
    Ok(pretty(json!({
        "target": script.target_matcher,
        "area_of_interest": script.area_of_interest,
        "timeout_ms": script.timeout_ms,
        "request_trigger_index": trigger,
        "actions": script.actions.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })))
}

/// Lists every leaf field of a JSON response body.
pub fn field_list(body: &str) -> Result<String, String> {
    let tree = ApiResponseTree::parse(body.as_bytes()).map_err(|e| e.to_string())?;
    let fields: Vec<String> = tree.enumerate_leaves().iter().map(ToString::to_string).collect();
    Ok(pretty(json!({ "count": fields.len(), "fields": fields })))
}

/// The response body with the given fields removed, one path per line.
pub fn delete_fields(body: &str, paths: &str) -> Result<String, String> {
    let tree = ApiResponseTree::parse(body.as_bytes()).map_err(|e| e.to_string())?;
    let paths = paths
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(FieldPath::parse)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let bytes = tree.apply_all_deletions(&paths).map_err(|e| e.to_string())?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
    Ok(pretty(value))
}

/// Compares two page snapshots. With `replay` non-empty, slots that differ
/// between `origin` and `replay` are masked first.
pub fn page_comparison(origin: &str, mutated: &str, replay: &str) -> Result<String, String> {
    let origin = parse_html(origin).map_err(|e| format!("origin: {e}"))?;
    let mutated = parse_html(mutated).map_err(|e| format!("mutated: {e}"))?;
    let mask = if replay.trim().is_empty() {
        IgnoreMask::default()
    } else {
        let replay = parse_html(replay).map_err(|e| format!("replay: {e}"))?;
        build_ignore_mask(&origin, &[replay]).map_err(|e| e.to_string())?
    };
    let result = compare(&origin, &mutated, &mask);
    Ok(pretty(json!({
        "verdict": result.verdict,
        "first_divergence": result.first_divergence.map(|d| d.to_string()),
        "mask_size": mask.len(),
    })))
}

fn js(result: Result<String, String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = parseScript)]
pub fn parse_script(text: &str) -> Result<String, JsError> {
    js(script_summary(text))
}

#[wasm_bindgen(js_name = enumerateFields)]
pub fn enumerate_fields(body: &str) -> Result<String, JsError> {
    js(field_list(body))
}

#[wasm_bindgen(js_name = deleteFields)]
pub fn delete_fields_js(body: &str, paths: &str) -> Result<String, JsError> {
    js(delete_fields(body, paths))
}

#[wasm_bindgen(js_name = compareHtml)]
pub fn compare_html(origin: &str, mutated: &str, replay: &str) -> Result<String, JsError> {
    js(page_comparison(origin, mutated, replay))
}
