//! Browser bindings for the demo page: each export returns a JSON string
//! that the page draws on a canvas.

use bitangent_core::bitangent::{project, trace_binodal, Side};
use bitangent_core::classifier::classify;
use bitangent_core::jet_json::parse_jet_pair;
use bitangent_core::normal_forms::{binodal_from_normal_form, Grid1};
use bitangent_core::thermo::{maxwell_construction, spinodal_single, vdw_pressure, FluidParams};
use bitangent_core::{CaseLabel, NormalFormSpec, Tolerance, TraceOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Branch {
    m: Vec<[f64; 2]>,
    n: Vec<[f64; 2]>,
    cusps_m: Vec<usize>,
    cusps_n: Vec<usize>,
}

#[derive(Serialize)]
struct TraceView {
    label: String,
    isolated: bool,
    branches: Vec<Branch>,
}

/// Classifies a jet pair and traces its binodal. Returns
/// `{label, isolated, branches: [{m, n, cusps_m, cusps_n}]}` with `m` the
/// `(u, v)` and `n` the `(x, y)` projections.
pub fn trace_view(jets_json: &str, step: f64, domain_bound: f64) -> Result<String, String> {
    let pair = parse_jet_pair(jets_json).map_err(|e| e.to_string())?;
    let (f, g) = (&pair.f.base, &pair.g.base);
    let report = classify(f, g, Tolerance::default());
    let opts = TraceOptions { step, domain_bound, max_steps: 20_000, ..Default::default() };
    let out = trace_binodal(f, g, &opts).map_err(|e| e.to_string())?;
    let branches = out
        .curves
        .iter()
        .map(|c| Branch {
            m: project(c, Side::M),
            n: project(c, Side::N),
            cusps_m: c.cusp_indices_m.clone(),
            cusps_n: c.cusp_indices_n.clone(),
        })
        .collect();
    let view = TraceView { label: report.label.to_string(), isolated: out.isolated, branches };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SliceView {
    label: String,
    tau: f64,
    /// Per branch, `(q1, q2)` of each point.
    branches: Vec<Vec<[f64; 2]>>,
    closed: Vec<bool>,
}

/// Binodal of a normal form at parameter `tau`, projected to `(q1, q2)`.
pub fn normal_form_view(label: &str, tau: f64, samples: usize) -> Result<String, String> {
    let label = CaseLabel::parse(label).ok_or_else(|| format!("unknown normal form {label}"))?;
    let spec = NormalFormSpec::new(label).with_tau(tau);
    let slice = binodal_from_normal_form(&spec, Grid1::new(-0.5, 0.5, samples.max(3))).map_err(|e| e.to_string())?;
    let view = SliceView {
        label: label.to_string(),
        tau,
        branches: slice.branches.iter().map(|b| b.iter().map(|p| [p.q[0], p.q[1]]).collect()).collect(),
        closed: slice.closed.clone(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Coexistence {
    v_liq: f64,
    v_vap: f64,
    p_tie: f64,
}

#[derive(Serialize)]
struct IsothermView {
    t: f64,
    /// `(V, P)` samples.
    curve: Vec<[f64; 2]>,
    maxwell: Option<Coexistence>,
    spinodal: Option<[f64; 2]>,
}

/// Reduced van der Waals isotherm at `t` with its Maxwell tie line and
/// spinodal volumes when `t < 1`.
pub fn isotherm_view(t: f64, samples: usize) -> Result<String, String> {
    let p = FluidParams::reduced();
    let n = samples.max(2);
    let (lo, hi) = (0.4_f64, 5.0_f64);
    // geometric spacing resolves the steep liquid branch
    let curve = (0..n)
        .map(|k| {
            let v = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            vdw_pressure(v, t, &p).map(|pr| [v, pr])
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let maxwell = maxwell_construction(t, &p, 1e-8)
        .ok()
        .map(|c| Coexistence { v_liq: c.v_liq, v_vap: c.v_vap, p_tie: c.p_tie });
    let spinodal = spinodal_single(t, &p).ok().map(|(a, b)| [a, b]);
    serde_json::to_string(&IsothermView { t, curve, maxwell, spinodal }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn trace(jets_json: &str, step: f64, domain_bound: f64) -> Result<String, JsError> {
    trace_view(jets_json, step, domain_bound).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn normal_form_binodal(label: &str, tau: f64, samples: usize) -> Result<String, JsError> {
    normal_form_view(label, tau, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn isotherm(t: f64, samples: usize) -> Result<String, JsError> {
    isotherm_view(t, samples).map_err(|e| JsError::new(&e))
}
