//! JSON schema for jet pairs.
//!
//! ```json
//! {"f": {"20": 1, "02": 1}, "g": {"20": 1, "11": 1, "03": 1},
//!  "g_tau1": {"02": 1}}
//! ```
//!
//! Keys are two decimal digits `"ij"` for the monomial `u^i v^j`. The `f` and
//! `g` blocks accept `2 ≤ i+j ≤ 4`; the optional `*_tau1` and `*_tau2` blocks
//! accept `1 ≤ i+j ≤ 4`.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::jets::{poly_from_terms, FamilyJet, JetError, Poly2, SurfaceJet, MAX_DEGREE};

#[derive(Debug, Error)]
pub enum JetInputError {
    #[error("invalid JSON at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("top level must be an object")]
    NotObject,
    #[error("missing required block \"{0}\"")]
    MissingBlock(&'static str),
    #[error("unknown block \"{0}\"")]
    UnknownBlock(String),
    #[error("block \"{block}\": expected an object of coefficients")]
    BlockNotObject { block: String },
    #[error("block \"{block}\", key \"{key}\": expected two digits \"ij\"")]
    BadKey { block: String, key: String },
    #[error("block \"{block}\", key \"{key}\": value is not a finite number")]
    BadValue { block: String, key: String },
    #[error("block \"{block}\": {source}")]
    Jet { block: String, source: JetError },
}

const BLOCKS: [&str; 6] = ["f", "g", "f_tau1", "g_tau1", "f_tau2", "g_tau2"];

/// A parsed pair of (possibly τ-dependent) jets.
#[derive(Clone, Debug, PartialEq)]
pub struct JetPair {
    pub f: FamilyJet,
    pub g: FamilyJet,
    /// True when any τ block was present.
    pub has_family: bool,
}

impl JetPair {
    pub fn from_jets(f: SurfaceJet, g: SurfaceJet) -> Self {
        Self { f: FamilyJet::from_base(f), g: FamilyJet::from_base(g), has_family: false }
    }
}

fn parse_block(block: &str, value: &Value, min_degree: usize) -> Result<Poly2, JetInputError> {
    let obj = value.as_object().ok_or_else(|| JetInputError::BlockNotObject { block: block.into() })?;
    let mut terms = Vec::with_capacity(obj.len());
    for (key, v) in obj {
        let bad_key = || JetInputError::BadKey { block: block.into(), key: key.clone() };
        let digits: Vec<usize> = key.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>().ok_or_else(bad_key)?;
        if digits.len() != 2 || digits[0] + digits[1] > MAX_DEGREE {
            if digits.len() == 2 {
                return Err(JetInputError::Jet {
                    block: block.into(),
                    source: JetError::IndexOutOfRange { i: digits[0], j: digits[1], min: min_degree, max: MAX_DEGREE },
                });
            }
            return Err(bad_key());
        }
        let c = v
            .as_f64()
            .filter(|c| c.is_finite())
            .ok_or_else(|| JetInputError::BadValue { block: block.into(), key: key.clone() })?;
        terms.push(((digits[0], digits[1]), c));
    }
    poly_from_terms(terms, min_degree).map_err(|source| JetInputError::Jet { block: block.into(), source })
}

pub fn parse_jet_pair(text: &str) -> Result<JetPair, JetInputError> {
    let value: Value = serde_json::from_str(text).map_err(|e| JetInputError::Syntax {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    jet_pair_from_value(&value)
}

pub fn jet_pair_from_value(value: &Value) -> Result<JetPair, JetInputError> {
    let obj = value.as_object().ok_or(JetInputError::NotObject)?;
    if let Some(k) = obj.keys().find(|k| !BLOCKS.contains(&k.as_str())) {
        return Err(JetInputError::UnknownBlock(k.clone()));
    }
    let base = |name: &'static str| -> Result<SurfaceJet, JetInputError> {
        let v = obj.get(name).ok_or(JetInputError::MissingBlock(name))?;
        let p = parse_block(name, v, 2)?;
        SurfaceJet::from_poly(p).map_err(|source| JetInputError::Jet { block: name.into(), source })
    };
    let tau = |name: &str| -> Result<Poly2, JetInputError> {
        obj.get(name).map_or(Ok(Poly2::zero()), |v| parse_block(name, v, 1))
    };
    let f = base("f")?;
    let g = base("g")?;
    let has_family = BLOCKS[2..].iter().any(|b| obj.contains_key(*b));
    let wrap = |block: &str, r: Result<FamilyJet, JetError>| r.map_err(|source| JetInputError::Jet { block: block.into(), source });
    Ok(JetPair {
        f: wrap("f_tau1", FamilyJet::new(f, tau("f_tau1")?, tau("f_tau2")?))?,
        g: wrap("g_tau1", FamilyJet::new(g, tau("g_tau1")?, tau("g_tau2")?))?,
        has_family,
    })
}

fn poly_to_value(p: &Poly2) -> Value {
    let m: BTreeMap<String, f64> = p.terms().map(|(i, j, c)| (format!("{i}{j}"), c)).collect();
    Value::Object(m.into_iter().map(|(k, v)| (k, Value::from(v))).collect::<Map<_, _>>())
}

/// Inverse of [`parse_jet_pair`]; τ blocks are written only when nonzero.
pub fn jet_pair_to_value(pair: &JetPair) -> Value {
    let mut out = Map::new();
    out.insert("f".into(), poly_to_value(pair.f.base.poly()));
    out.insert("g".into(), poly_to_value(pair.g.base.poly()));
    for (name, p) in [
        ("f_tau1", pair.f.tau1()),
        ("g_tau1", pair.g.tau1()),
        ("f_tau2", pair.f.tau2()),
        ("g_tau2", pair.g.tau2()),
    ] {
        if p.terms().next().is_some() {
            out.insert(name.into(), poly_to_value(p));
        }
    }
    Value::Object(out)
}
