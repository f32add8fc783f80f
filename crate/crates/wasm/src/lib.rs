//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export takes and returns JSON text, the same documents the HTTP
//! service uses. Failures throw the serialized error object.

use compare_kit::api::{dispatch, ApiError, Limits, Operation, VERSION};
use wasm_bindgen::prelude::*;

fn call(op: Operation, body: &str) -> Result<String, String> {
    // Simulation is not exported; the default limit is never reached.
    dispatch(op, body, &Limits::default())
        .map(|v| v.to_string())
        .map_err(|e: ApiError| serde_json::json!({ "error": e }).to_string())
}

pub fn evaluate_json(scenario: &str) -> Result<String, String> {
    call(Operation::Evaluate, scenario)
}

pub fn sweep_json(request: &str) -> Result<String, String> {
    call(Operation::Sweep, request)
}

/// `[rho_min, rho_max]` for two binary marginals.
pub fn bounds(p1: f64, p2: f64) -> Result<Vec<f64>, String> {
    let body = serde_json::json!({ "p1": p1, "p2": p2 }).to_string();
    let v: serde_json::Value = serde_json::from_str(&call(Operation::AssociationConvert, &body)?).map_err(|e| e.to_string())?;
    match (v["rho_min"].as_f64(), v["rho_max"].as_f64()) {
        (Some(lo), Some(hi)) => Ok(vec![lo, hi]),
        _ => Err("bounds missing from response".into()),
    }
}

#[wasm_bindgen]
pub fn evaluate(scenario: &str) -> Result<String, JsValue> {
    evaluate_json(scenario).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(request: &str) -> Result<String, JsValue> {
    sweep_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn correlation_bounds(p1: f64, p2: f64) -> Result<Vec<f64>, JsValue> {
    bounds(p1, p2).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn version() -> String {
    VERSION.to_string()
}
