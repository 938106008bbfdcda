use bitangent_web::{isotherm_view, normal_form_view, trace_view};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn trace_view_reports_label_and_branches() {
    let v = parse(trace_view(r#"{"f": {"02": 1, "30": 1}, "g": {"20": 1, "11": 1, "02": 1}}"#, 2e-3, 0.2).unwrap());
    assert_eq!(v["label"], "C3hat");
    assert_eq!(v["isolated"], false);
    let b = &v["branches"][0];
    assert_eq!(b["m"].as_array().unwrap().len(), b["n"].as_array().unwrap().len());
    assert_eq!(b["cusps_n"].as_array().unwrap().len(), 1);
}

#[test]
fn trace_view_rejects_bad_json() {
    assert!(trace_view(r#"{"f": {"20": 1}}"#, 1e-3, 0.1).unwrap_err().contains("\"g\""));
}

#[test]
fn lips_slice_is_a_loop_then_empty() {
    let neg = parse(normal_form_view("C3starPlus", -0.05, 201).unwrap());
    assert_eq!(neg["closed"], serde_json::json!([true]));
    let pos = parse(normal_form_view("C3starPlus", 0.05, 201).unwrap());
    assert!(pos["branches"].as_array().unwrap().is_empty());
}

#[test]
fn isotherm_view_has_tie_line_below_critical() {
    let v = parse(isotherm_view(0.9, 100).unwrap());
    let m = &v["maxwell"];
    assert!((m["p_tie"].as_f64().unwrap() - 0.6469983518722522).abs() < 1e-12);
    let s = v["spinodal"].as_array().unwrap();
    assert!(m["v_liq"].as_f64().unwrap() < s[0].as_f64().unwrap());
    let above = parse(isotherm_view(1.2, 100).unwrap());
    assert!(above["maxwell"].is_null() && above["spinodal"].is_null());
}
