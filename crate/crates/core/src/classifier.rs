//! Local classification of a bitangent pair of patches.
//!
//! Every case is a conjunction of vanishing and non-vanishing conditions on
//! jet coefficients. All cases are evaluated; a pair receives a label when
//! exactly one case matches, and is `Unclassified` otherwise.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jets::{FamilyJet, SurfaceJet};
use crate::tolerance::Tolerance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseLabel {
    B2hat,
    B3hat,
    B4hat,
    B3starstar,
    C3hat,
    C3starPlus,
    C3starMinus,
    C4hat,
    C31hat,
    F4hat,
    /// `Ĉ₃*` reached with the roles of the two patches exchanged.
    ThreeE,
    Unclassified,
}

impl CaseLabel {
    pub const ALL: [CaseLabel; 12] = [
        CaseLabel::B2hat,
        CaseLabel::B3hat,
        CaseLabel::B4hat,
        CaseLabel::B3starstar,
        CaseLabel::C3hat,
        CaseLabel::C3starPlus,
        CaseLabel::C3starMinus,
        CaseLabel::C4hat,
        CaseLabel::C31hat,
        CaseLabel::F4hat,
        CaseLabel::ThreeE,
        CaseLabel::Unclassified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseLabel::B2hat => "B2hat",
            CaseLabel::B3hat => "B3hat",
            CaseLabel::B4hat => "B4hat",
            CaseLabel::B3starstar => "B3starstar",
            CaseLabel::C3hat => "C3hat",
            CaseLabel::C3starPlus => "C3starPlus",
            CaseLabel::C3starMinus => "C3starMinus",
            CaseLabel::C4hat => "C4hat",
            CaseLabel::C31hat => "C31hat",
            CaseLabel::F4hat => "F4hat",
            CaseLabel::ThreeE => "ThreeE",
            CaseLabel::Unclassified => "Unclassified",
        }
    }

    /// Accepts the canonical names plus short aliases such as `C3` or
    /// `C3starMinus`.
    pub fn parse(s: &str) -> Option<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "");
        let label = match key.as_str() {
            "b2hat" | "b2" => CaseLabel::B2hat,
            "b3hat" | "b3" => CaseLabel::B3hat,
            "b4hat" | "b4" => CaseLabel::B4hat,
            "b3starstar" | "b3**" => CaseLabel::B3starstar,
            "c3hat" | "c3" => CaseLabel::C3hat,
            "c3starplus" | "c3*+" => CaseLabel::C3starPlus,
            "c3starminus" | "c3*-" => CaseLabel::C3starMinus,
            "c4hat" | "c4" => CaseLabel::C4hat,
            "c31hat" | "c31" | "c3,1" => CaseLabel::C31hat,
            "f4hat" | "f4" => CaseLabel::F4hat,
            "threee" | "3e" => CaseLabel::ThreeE,
            "unclassified" => CaseLabel::Unclassified,
            _ => return None,
        };
        Some(label)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Requirement {
    Zero,
    Nonzero,
}

/// One tested condition. `margin > 0` exactly when it is satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub required: Requirement,
    pub satisfied: bool,
    pub margin: f64,
}

impl Condition {
    fn new(name: &str, value: f64, required: Requirement, band: f64) -> Self {
        let (satisfied, margin) = match required {
            Requirement::Zero => (value.abs() <= band, band - value.abs()),
            Requirement::Nonzero => (value.abs() > band, value.abs() - band),
        };
        Self { name: name.to_string(), value, required, satisfied, margin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Plus)
        } else if x < 0.0 {
            Some(Sign::Minus)
        } else {
            None
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub label: CaseLabel,
    pub normal_form: String,
    pub c3: Option<f64>,
    pub beaks_sign: Option<Sign>,
    pub conditions: Vec<Condition>,
}

impl CaseReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Conditions that failed (only non-empty for `Unclassified`).
    pub fn failed(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.satisfied)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("{0} vanishes within tolerance; expression undefined")]
    Vanishing(&'static str),
    #[error("{0}")]
    Precondition(&'static str),
}

/// `f₃₀ − f₂₁a + f₁₂a² − f₀₃a³` with `a = f₁₁/2f₀₂`: the cubic terms on
/// the asymptotic direction `(1, −a)` of a parabolic jet.
fn asymptotic_cubic(j: &SurfaceJet) -> f64 {
    let a = j.coeff(1, 1) / (2.0 * j.coeff(0, 2));
    j.coeff(3, 0) - j.coeff(2, 1) * a + j.coeff(1, 2) * a * a - j.coeff(0, 3) * a * a * a
}

fn pair_scale(f: &SurfaceJet, g: &SurfaceJet) -> f64 {
    f.scale().max(g.scale())
}

fn require_f02_g02(f: &SurfaceJet, g: &SurfaceJet, tol: Tolerance) -> Result<(), ClassifyError> {
    let s = pair_scale(f, g);
    if tol.is_zero(f.coeff(0, 2), s) {
        return Err(ClassifyError::Vanishing("f02"));
    }
    if tol.is_zero(g.coeff(0, 2), s) {
        return Err(ClassifyError::Vanishing("g02"));
    }
    Ok(())
}

/// `c₃ = −(f₃₀ − f₂₁f₁₁/2f₀₂ + …)(g₃₀ − g₂₁g₁₁/2g₀₂ + …)`; positive gives the
/// lips side, negative the beaks side.
pub fn c3(f: &SurfaceJet, g: &SurfaceJet, tol: Tolerance) -> Result<f64, ClassifyError> {
    require_f02_g02(f, g, tol)?;
    Ok(-asymptotic_cubic(f) * asymptotic_cubic(g))
}

/// `(f₃₀ − f₂₁a + f₁₂a² − f₀₃a³)(g₃₀ − g₂₁c + g₁₂c² − g₀₃c³)` with the
/// quadratic parts written `∝ (au + v)²`, `∝ (cx + y)²`. Positive means two
/// real branches.
pub fn beaks_criterion(f: &SurfaceJet, g: &SurfaceJet, tol: Tolerance) -> Result<f64, ClassifyError> {
    require_f02_g02(f, g, tol)?;
    Ok(asymptotic_cubic(f) * asymptotic_cubic(g))
}

/// The invariant `ps − qr` whose non-vanishing makes the binodal on `M` an
/// ordinary cusp when `N` is parabolic: `6K² / (b⁶ (f₁₁² − 4f₂₀f₀₂))` where
/// `g`'s quadratic part is `±(ax + by)²` and `K = a³g₀₃ − a²b g₁₂ + ab² g₂₁ − b³g₃₀`
/// is computed for the sign-normalized `g`. `(u(x), v(x))` along the
/// binodal then has `u = p x² + q x³`, `v = r x² + s x³` up to higher order.
pub fn cusp_invariant(f: &SurfaceJet, g: &SurfaceJet, tol: Tolerance) -> Result<f64, ClassifyError> {
    let s = pair_scale(f, g);
    let d = f.discriminant();
    if tol.is_zero(d, s) {
        return Err(ClassifyError::Precondition("M is parabolic"));
    }
    if tol.is_nonzero(g.discriminant(), s) {
        return Err(ClassifyError::Precondition("N is not parabolic"));
    }
    let (_, _, b) = g.square_root_of_quadratic();
    if tol.is_zero(b, s) {
        return Err(ClassifyError::Vanishing("b (asymptotic direction of N along the tie line)"));
    }
    let k = g.cubic_invariant();
    Ok(6.0 * k * k / (b.powi(6) * d))
}

/// Leading coefficients `k` of the three curves `y = k x²` through a cusp of
/// Gauss in the frame `z = f₀₂y² + f₂₁x²y + … + f₄₀x⁴ + …`: the local binodal,
/// the bilocal binodal and the parabolic curve. Coefficients are normalized
/// by `f₀₂`.
pub fn gauss_cusp_curves(f: &SurfaceJet, tol: Tolerance) -> Result<(f64, f64, f64), ClassifyError> {
    let s = f.scale();
    let f02 = f.coeff(0, 2);
    if tol.is_zero(f02, s) {
        return Err(ClassifyError::Vanishing("f02"));
    }
    if [f.coeff(2, 0), f.coeff(1, 1), f.coeff(3, 0)].iter().any(|&c| tol.is_nonzero(c, s)) {
        return Err(ClassifyError::Precondition("jet is not in cusp-of-Gauss frame (f20 = f11 = f30 = 0)"));
    }
    let f21 = f.coeff(2, 1) / f02;
    let f40 = f.coeff(4, 0) / f02;
    if tol.is_zero(f21, s) {
        return Err(ClassifyError::Vanishing("f21"));
    }
    if tol.is_zero(f21 * f21 - 4.0 * f40, s) {
        return Err(ClassifyError::Precondition("degenerate cusp of Gauss (f21² = 4 f40)"));
    }
    Ok((-2.0 * f40 / f21, -f21 / 2.0, -6.0 * f40 / f21))
}

/// `f₂₁′² − 4f₀₂f₄₀′` in the shear frame where the quadratic part is
/// `f₀₂w²`; nonzero for a nondegenerate cusp of Gauss.
fn cusp_nondegeneracy(f: &SurfaceJet) -> f64 {
    match f.asymptotic_frame() {
        Ok(h) => h.coeff(2, 1).powi(2) - 4.0 * h.coeff(0, 2) * h.coeff(4, 0),
        Err(_) => 0.0,
    }
}

struct Pattern {
    label: CaseLabel,
    conditions: Vec<Condition>,
}

impl Pattern {
    fn matched(&self) -> bool {
        self.conditions.iter().all(|c| c.satisfied)
    }

    fn failures(&self) -> usize {
        self.conditions.iter().filter(|c| !c.satisfied).count()
    }
}

fn patterns(f: &SurfaceJet, g: &SurfaceJet, family: Option<(&FamilyJet, &FamilyJet)>, tol: Tolerance) -> Vec<Pattern> {
    use Requirement::{Nonzero as NZ, Zero as Z};
    let band = tol.band(pair_scale(f, g));
    let c = |name: &str, value: f64, req: Requirement| Condition::new(name, value, req, band);

    let (f20, f11, f02) = f.quadratic();
    let (g20, g11, g02) = g.quadratic();
    let disc_f = f.discriminant();
    let disc_g = g.discriminant();
    let kf = f.cubic_invariant();
    let kg = g.cubic_invariant();
    let cross = f11 * g02 - f02 * g11;
    let c3v = if f02 != 0.0 && g02 != 0.0 { -asymptotic_cubic(f) * asymptotic_cubic(g) } else { 0.0 };

    let mut b4 = vec![
        c("disc_f", disc_f, NZ),
        c("g02", g02, Z),
        c("g03", g.coeff(0, 3), Z),
        c("g04", g.coeff(0, 4), NZ),
        c("g11", g11, NZ),
    ];
    let mut c3star = vec![
        c("disc_f", disc_f, Z),
        c("disc_g", disc_g, Z),
        c("f02", f02, NZ),
        c("g02", g02, NZ),
        c("cubic_invariant_f", kf, NZ),
        c("cubic_invariant_g", kg, NZ),
        c("f11g02-f02g11", cross, NZ),
        c("c3", c3v, NZ),
    ];
    if let Some((ff, gf)) = family {
        b4.push(c("g021", gf.tau1().coeff(0, 2), NZ));
        let a = if f02 != 0.0 { f11 / (2.0 * f02) } else { 0.0 };
        let tilt = |p: &crate::jets::Poly2| p.coeff(1, 0) - a * p.coeff(0, 1);
        c3star.push(c("family_tilt", tilt(gf.tau1()) - tilt(ff.tau1()), NZ));
    }

    let c3_label = if c3v > 0.0 { CaseLabel::C3starPlus } else { CaseLabel::C3starMinus };
    vec![
        Pattern { label: CaseLabel::B2hat, conditions: vec![c("disc_f", disc_f, NZ), c("g02", g02, NZ)] },
        Pattern {
            label: CaseLabel::B3hat,
            conditions: vec![
                c("disc_f", disc_f, NZ),
                c("g02", g02, Z),
                c("g03", g.coeff(0, 3), NZ),
                c("g11", g11, NZ),
                c("versality_det_B3", -6.0 * g11 * g.coeff(0, 3), NZ),
            ],
        },
        Pattern { label: CaseLabel::B4hat, conditions: b4 },
        Pattern {
            label: CaseLabel::B3starstar,
            conditions: vec![
                c("disc_f", disc_f, NZ),
                c("g02", g02, Z),
                c("g11", g11, Z),
                c("g20", g20, NZ),
                c("g03", g.coeff(0, 3), NZ),
            ],
        },
        Pattern {
            label: CaseLabel::C3hat,
            conditions: vec![
                c("disc_f", disc_f, Z),
                c("f02", f02, NZ),
                c("cubic_invariant_f", kf, NZ),
                c("g02", g02, NZ),
                c("disc_g", disc_g, NZ),
                c("f11g02-f02g11", cross, NZ),
                c("versality_det_C3", disc_g, NZ),
            ],
        },
        Pattern { label: c3_label, conditions: c3star },
        Pattern {
            label: CaseLabel::C4hat,
            conditions: vec![
                c("disc_f", disc_f, Z),
                c("f02", f02, NZ),
                c("cubic_invariant_f", kf, Z),
                c("cusp_nondegeneracy_f", cusp_nondegeneracy(f), NZ),
                c("g02", g02, NZ),
                c("disc_g", disc_g, NZ),
                c("f11g02-f02g11", cross, NZ),
            ],
        },
        Pattern {
            label: CaseLabel::C31hat,
            conditions: vec![
                c("disc_f", disc_f, Z),
                c("f02", f02, NZ),
                c("cubic_invariant_f", kf, NZ),
                c("g02", g02, NZ),
                c("disc_g", disc_g, NZ),
                c("f11g02-f02g11", cross, Z),
            ],
        },
        Pattern {
            label: CaseLabel::F4hat,
            conditions: vec![
                c("disc_f", disc_f, Z),
                c("f02", f02, NZ),
                c("cubic_invariant_f", kf, NZ),
                c("disc_g", disc_g, NZ),
                c("g02", g02, Z),
                c("g03", g.coeff(0, 3), NZ),
                c("f02g11", f02 * g11, NZ),
            ],
        },
        Pattern {
            label: CaseLabel::ThreeE,
            conditions: vec![
                c("f02", f02, Z),
                c("f11", f11, Z),
                c("f20", f20, NZ),
                c("f03", f.coeff(0, 3), NZ),
                c("disc_g", disc_g, NZ),
            ],
        },
    ]
}

fn normal_form_text(label: CaseLabel, f: &SurfaceJet) -> String {
    let v2 = if f.discriminant() < 0.0 { "+" } else { "-" };
    match label {
        CaseLabel::B2hat => format!("-q3 + eps*(u^2 {v2} v^2 + eps + q1)"),
        CaseLabel::B3hat => format!("-q3 + eps*(u^2 {v2} v^2 ± eps^2 + q2*eps + q1)"),
        CaseLabel::B4hat => format!("-q3 + eps*(u^2 {v2} v^2 + eps^3 + tau*eps^2 + q2*eps + q1)"),
        CaseLabel::B3starstar => format!("-q3 + eps*(u^2 {v2} v^2 ± eps^3 + a(q1,q2)*eps^2 + q2*eps + q1)"),
        CaseLabel::C3hat => "-q3 + eps*(u^3 + u*eps + eps + q2*u + q1 ± v^2)".into(),
        CaseLabel::C3starPlus => "-q3 + eps*(u^3 + u*eps + eps + (tau + q2^2)*u + q1 ± v^2)".into(),
        CaseLabel::C3starMinus => "-q3 + eps*(u^3 + u*eps + eps + (tau - q2^2)*u + q1 ± v^2)".into(),
        CaseLabel::C4hat => "-q3 + eps*(u^4 + tau*u^2 + u*eps + eps + q2*u + q1 ± v^2)".into(),
        CaseLabel::C31hat => "-q3 + eps*(u^3 + u*(tau*eps ± eps^2) + eps + q2*u + q1 ± v^2)".into(),
        CaseLabel::F4hat => "-q3 + eps*(u^3 + u*eps ± eps^2 + tau*eps + q2*u + q1 ± v^2)".into(),
        CaseLabel::ThreeE => "-q3 + eps*(u^3 + u*eps + eps + (tau ± q2^2)*u + q1 ± v^2)".into(),
        CaseLabel::Unclassified => String::new(),
    }
}

fn report(f: &SurfaceJet, g: &SurfaceJet, family: Option<(&FamilyJet, &FamilyJet)>, tol: Tolerance) -> CaseReport {
    let pats = patterns(f, g, family, tol);
    let matched: Vec<&Pattern> = pats.iter().filter(|p| p.matched()).collect();
    let scale = pair_scale(f, g);
    let both_parabolic = f.is_parabolic(tol) && g.is_parabolic(tol);
    let (c3v, beaks) = if both_parabolic {
        match (c3(f, g, tol), beaks_criterion(f, g, tol)) {
            (Ok(c), Ok(b)) => (Some(c), Sign::of(b).filter(|_| tol.is_nonzero(b, scale))),
            _ => (None, None),
        }
    } else {
        (None, None)
    };
    if let [p] = matched.as_slice() {
        return CaseReport {
            label: p.label,
            normal_form: normal_form_text(p.label, f),
            c3: c3v,
            beaks_sign: beaks,
            conditions: p.conditions.clone(),
        };
    }
    // no unique match: report the nearest patterns' conditions
    let candidates: Vec<&Pattern> = if matched.is_empty() {
        let best = pats.iter().map(Pattern::failures).min().unwrap_or(0);
        pats.iter().filter(|p| p.failures() == best).collect()
    } else {
        matched
    };
    let mut conditions: Vec<Condition> = Vec::new();
    for p in candidates {
        for c in &p.conditions {
            if !conditions.iter().any(|d| d.name == c.name && d.required == c.required) {
                let mut c = c.clone();
                c.name = format!("{}:{}", p.label, c.name);
                conditions.push(c);
            }
        }
    }
    CaseReport { label: CaseLabel::Unclassified, normal_form: String::new(), c3: c3v, beaks_sign: beaks, conditions }
}

/// Classifies the pair at the base bitangent plane.
pub fn classify(f: &SurfaceJet, g: &SurfaceJet, tol: Tolerance) -> CaseReport {
    report(f, g, None, tol)
}

/// As [`classify`] for the `τ = 0` fiber, adding the genericity conditions
/// on the `τ` terms to the matched case.
pub fn classify_family(f: &FamilyJet, g: &FamilyJet, tol: Tolerance) -> CaseReport {
    report(&f.base, &g.base, Some((f, g)), tol)
}
