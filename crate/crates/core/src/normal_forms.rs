//! Generating-family normal forms and their criminants.
//!
//! Each form reads `F = −q₃ + ε·G(u, v, ε, q₁, q₂; τ)`. The criminant is the
//! set of `q = (q₁, q₂, q₃)` for which `F = F_u = F_v = F_ε = 0` has a
//! solution. `F_v = 2ε·(±v)` forces `v = 0`; writing `G = P + q₁`, the
//! remaining equations give
//!
//! ```text
//! P_u = 0,   q₁ = −P − ε P_ε,   q₃ = −ε² P_ε.
//! ```
//!
//! The plane `q₃ = 0` (from `ε = 0`) is a redundant component, and the
//! `ε = 0` slice of the criminant is the binodal curve.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::CaseLabel;
use crate::export::{csv_table, Mesh};

/// Forward-mode dual number `a + b·δ`, `δ² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn constant(re: f64) -> Self {
        Self { re, du: 0.0 }
    }

    pub fn variable(re: f64) -> Self {
        Self { re, du: 1.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { re: self.re + o.re, du: self.du + o.du }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { re: self.re - o.re, du: self.du - o.du }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { re: self.re * o.re, du: self.re * o.du + self.du * o.re }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { re: -self.re, du: -self.du }
    }
}

/// Arithmetic needed to evaluate a polynomial normal form.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for Dual {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalFormError {
    #[error("B3starstar: modulus unspecified, no normal form to evaluate")]
    ModulusUnspecified,
    #[error("{0} has no normal form")]
    NoNormalForm(CaseLabel),
    #[error("{0} has no τ-dependent normal form to sweep")]
    NotAFamily(CaseLabel),
    #[error("invalid grid: {0}")]
    Grid(String),
}

/// A normal form with its sign choices and parameter `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormSpec {
    pub label: CaseLabel,
    /// Sign of the `ε²` term (B3, C31, F4).
    pub sign_eps2: f64,
    /// Sign of `v²` (every form).
    pub sign_v2: f64,
    /// Sign of `q₂²` for `ThreeE`; the `C3star±` labels fix it themselves.
    pub sign_q2sq: f64,
    pub tau: f64,
}

impl NormalFormSpec {
    pub fn new(label: CaseLabel) -> Self {
        Self { label, sign_eps2: 1.0, sign_v2: 1.0, sign_q2sq: 1.0, tau: 0.0 }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn check(&self) -> Result<(), NormalFormError> {
        match self.label {
            CaseLabel::B3starstar => Err(NormalFormError::ModulusUnspecified),
            CaseLabel::Unclassified => Err(NormalFormError::NoNormalForm(self.label)),
            _ => Ok(()),
        }
    }

    /// Effective sign of `q₂²` in the `Ĉ₃*` forms.
    fn q2sq_sign(&self) -> f64 {
        match self.label {
            CaseLabel::C3starPlus => 1.0,
            CaseLabel::C3starMinus => -1.0,
            _ => self.sign_q2sq.signum(),
        }
    }

    fn is_b_family(&self) -> bool {
        matches!(self.label, CaseLabel::B2hat | CaseLabel::B3hat | CaseLabel::B4hat)
    }

    /// `G` of `F = −q₃ + εG`.
    fn g_part<T: Scalar>(&self, u: T, v: T, e: T, q1: T, q2: T) -> T {
        let c = T::from_f64;
        let tau = c(self.tau);
        let sv = c(self.sign_v2.signum());
        let se = c(self.sign_eps2.signum());
        let v2 = sv * v * v;
        match self.label {
            CaseLabel::B2hat => u * u + v2 + e + q1,
            CaseLabel::B3hat => u * u + v2 + se * e * e + q2 * e + q1,
            CaseLabel::B4hat => u * u + v2 + e * e * e + tau * e * e + q2 * e + q1,
            CaseLabel::C3hat => u * u * u + u * e + e + q2 * u + q1 + v2,
            CaseLabel::C3starPlus | CaseLabel::C3starMinus | CaseLabel::ThreeE => {
                let sq = c(self.q2sq_sign());
                u * u * u + u * e + e + (tau + sq * q2 * q2) * u + q1 + v2
            }
            CaseLabel::C4hat => u * u * u * u + tau * u * u + u * e + e + q2 * u + q1 + v2,
            CaseLabel::C31hat => u * u * u + u * (tau * e + se * e * e) + e + q2 * u + q1 + v2,
            CaseLabel::F4hat => u * u * u + u * e + se * e * e + tau * e + q2 * u + q1 + v2,
            CaseLabel::B3starstar | CaseLabel::Unclassified => unreachable!("checked by caller"),
        }
    }

    fn raw<T: Scalar>(&self, u: T, v: T, e: T, q: [T; 3]) -> T {
        -q[2] + e * self.g_part(u, v, e, q[0], q[1])
    }
}

/// Literal evaluation of the generating function.
pub fn generating_value<T: Scalar>(spec: &NormalFormSpec, u: T, v: T, eps: T, q1: T, q2: T, q3: T) -> Result<T, NormalFormError> {
    spec.check()?;
    Ok(spec.raw(u, v, eps, [q1, q2, q3]))
}

/// `(F, F_u, F_v, F_ε)` by forward-mode differentiation.
pub fn defining_equations(spec: &NormalFormSpec, u: f64, v: f64, eps: f64, q: [f64; 3]) -> Result<[f64; 4], NormalFormError> {
    spec.check()?;
    let qd = q.map(Dual::constant);
    let k = Dual::constant;
    let x = Dual::variable;
    let fu = spec.raw(x(u), k(v), k(eps), qd);
    let fv = spec.raw(k(u), x(v), k(eps), qd);
    let fe = spec.raw(k(u), k(v), x(eps), qd);
    Ok([fu.re, fu.du, fv.du, fe.du])
}

/// Closed-form `Ĉ₃` criminant `(2u³ − εu − 2ε, −3u² − ε, −ε²u − ε²)`.
pub fn criminant_closed_form_c3(u: f64, eps: f64) -> [f64; 3] {
    [2.0 * u * u * u - eps * u - 2.0 * eps, -3.0 * u * u - eps, -eps * eps * u - eps * eps]
}

/// Evenly spaced samples of a closed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1 {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid1 {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    /// `[−0.5, 0.5]` with 200 samples.
    pub fn default_local() -> Self {
        Self::new(-0.5, 0.5, 200)
    }

    /// The same interval with an odd sample count, so a symmetric interval
    /// samples 0 exactly.
    pub fn odd(self) -> Self {
        Self { count: self.count | 1, ..self }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.min + self.max)];
        }
        let h = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let x = self.min + k as f64 * h;
                // snap the symmetric midpoint to an exact zero
                if x.abs() < 1e-15 * h.abs() {
                    0.0
                } else {
                    x
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<(), NormalFormError> {
        if self.count == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(NormalFormError::Grid(format!("{self:?}")));
        }
        Ok(())
    }
}

/// A criminant point with the normal-form variables that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriminantPoint {
    pub q: [f64; 3],
    pub u: f64,
    pub eps: f64,
    /// `max(|F|, |F_u|, |F_v|, |F_ε|)` at `(u, v = 0, ε, q)`.
    pub residual: f64,
}

/// One sheet sampled on the parameter grid, row-major in `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sheet {
    pub points: Vec<Option<CriminantPoint>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriminantPatch {
    pub spec: NormalFormSpec,
    /// Names of the two grid parameters: `(u, eps)` for the C family,
    /// `(q2, eps)` for the B family.
    pub param_names: [&'static str; 2],
    /// How the unknowns were eliminated.
    pub elimination: &'static str,
    pub first: Vec<f64>,
    pub eps: Vec<f64>,
    pub sheets: Vec<Sheet>,
    /// Grid points with no real solution or a vanishing elimination
    /// coefficient.
    pub skipped: usize,
    pub redundant_plane: Mesh,
}

impl CriminantPatch {
    pub fn points(&self) -> impl Iterator<Item = &CriminantPoint> {
        self.sheets.iter().flat_map(|s| s.points.iter().flatten())
    }

    pub fn max_residual(&self) -> f64 {
        self.points().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn at(&self, sheet: usize, i_first: usize, i_eps: usize) -> Option<&CriminantPoint> {
        self.sheets[sheet].points[i_eps * self.first.len() + i_first].as_ref()
    }

    /// All sheets as one quad mesh.
    pub fn mesh(&self) -> Mesh {
        let mut out = Mesh::default();
        for s in &self.sheets {
            let grid: Vec<Option<[f64; 3]>> = s.points.iter().map(|p| p.map(|p| p.q)).collect();
            let m = Mesh::from_grid(self.eps.len(), self.first.len(), &grid);
            let off = out.vertices.len();
            out.vertices.extend(m.vertices);
            out.faces.extend(m.faces.into_iter().map(|f| f.into_iter().map(|i| i + off).collect()));
        }
        out
    }
}

const ELIM_C: &str = "v = 0; q2 from F_u = 0; q1 from F_eps = 0; q3 from F = 0";
const ELIM_B: &str = "v = 0; u = 0 from F_u = 0; q2 free; q1 from F_eps = 0; q3 from F = 0";

/// Solves the affine-in-q₁ equation `F_ε = 0` and then `F = 0` for `q₃`.
fn complete(spec: &NormalFormSpec, u: f64, eps: f64, q2: f64) -> Option<CriminantPoint> {
    let fe = |q1: f64| defining_equations(spec, u, 0.0, eps, [q1, q2, 0.0]).map(|d| d[3]).ok();
    let f0 = fe(0.0)?;
    let slope = fe(1.0)? - f0;
    if slope.abs() < 1e-300 {
        return None;
    }
    let q1 = -f0 / slope;
    let q3 = generating_value(spec, u, 0.0, eps, q1, q2, 0.0).ok()?;
    let q = [q1, q2, q3];
    let d = defining_equations(spec, u, 0.0, eps, q).ok()?;
    let residual = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Some(CriminantPoint { q, u, eps, residual })
}

/// Roots `q₂` of `F_u = 0`, which is at most quadratic in `q₂`.
fn q2_roots(spec: &NormalFormSpec, u: f64, eps: f64) -> Option<Vec<f64>> {
    // divide out the factor ε so the ε = 0 slice is the limit
    let gu = |q2: f64| {
        let d = spec.g_part(Dual::variable(u), Dual::constant(0.0), Dual::constant(eps), Dual::constant(0.0), Dual::constant(q2));
        d.du
    };
    let c0 = gu(0.0);
    let (p, m) = (gu(1.0), gu(-1.0));
    let c1 = 0.5 * (p - m);
    let c2 = 0.5 * (p + m) - c0;
    if c2.abs() <= 1e-14 * (c0.abs() + c1.abs() + 1.0) {
        if c1.abs() < 1e-300 {
            return None;
        }
        return Some(vec![-c0 / c1]);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Some(Vec::new());
    }
    let r = disc.sqrt() / (2.0 * c2.abs());
    let mid = -c1 / (2.0 * c2);
    Some(vec![mid + r, mid - r])
}

fn number_of_sheets(spec: &NormalFormSpec) -> usize {
    match spec.label {
        CaseLabel::C3starPlus | CaseLabel::C3starMinus | CaseLabel::ThreeE => 2,
        _ => 1,
    }
}

/// Criminant of a normal form sampled over `first × eps`, where `first` is
/// `u` for the C family and `q₂` for the B family.
pub fn criminant_numeric(spec: &NormalFormSpec, first: Grid1, eps: Grid1) -> Result<CriminantPatch, NormalFormError> {
    spec.check()?;
    first.validate()?;
    eps.validate()?;
    let fv = first.values();
    let ev = eps.values();
    let nsheets = number_of_sheets(spec);
    let mut sheets = vec![Sheet { points: Vec::with_capacity(fv.len() * ev.len()) }; nsheets];
    let mut skipped = 0;
    let b_family = spec.is_b_family();
    for &e in &ev {
        for &a in &fv {
            if b_family {
                let p = complete(spec, 0.0, e, a);
                skipped += usize::from(p.is_none());
                sheets[0].points.push(p);
                continue;
            }
            match q2_roots(spec, a, e) {
                Some(roots) if roots.len() == nsheets => {
                    for (s, &q2) in roots.iter().enumerate() {
                        let p = complete(spec, a, e, q2);
                        skipped += usize::from(p.is_none());
                        sheets[s].points.push(p);
                    }
                }
                _ => {
                    skipped += nsheets;
                    for s in sheets.iter_mut() {
                        s.points.push(None);
                    }
                }
            }
        }
    }
    let patch = CriminantPatch {
        spec: *spec,
        param_names: if b_family { ["q2", "eps"] } else { ["u", "eps"] },
        elimination: if b_family { ELIM_B } else { ELIM_C },
        first: fv,
        eps: ev,
        sheets,
        skipped,
        redundant_plane: Mesh::default(),
    };
    let plane = redundant_plane(&patch);
    Ok(CriminantPatch { redundant_plane: plane, ..patch })
}

/// The plane `q₃ = 0` over the `(q₁, q₂)` extent of a patch.
fn redundant_plane(patch: &CriminantPatch) -> Mesh {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in patch.points() {
        for k in 0..2 {
            lo[k] = lo[k].min(p.q[k]);
            hi[k] = hi[k].max(p.q[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0; 2];
        hi = [1.0; 2];
    }
    Mesh {
        vertices: vec![[lo[0], lo[1], 0.0], [hi[0], lo[1], 0.0], [hi[0], hi[1], 0.0], [lo[0], hi[1], 0.0]],
        faces: vec![vec![0, 1, 2, 3]],
    }
}

/// The `ε = 0` slice of the criminant as polylines in the plane `q₃ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinodalSlice {
    pub spec: NormalFormSpec,
    pub branches: Vec<Vec<CriminantPoint>>,
    /// Parallel to `branches`: whether each polyline closes on itself.
    pub closed: Vec<bool>,
}

impl BinodalSlice {
    pub fn point_count(&self) -> usize {
        self.branches.iter().map(Vec::len).sum()
    }

    /// Smallest distance between points of different branches.
    pub fn min_branch_separation(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.branches.len() {
            for j in i + 1..self.branches.len() {
                for a in &self.branches[i] {
                    for b in &self.branches[j] {
                        let d = (a.q[0] - b.q[0]).hypot(a.q[1] - b.q[1]);
                        best = Some(best.map_or(d, |x: f64| x.min(d)));
                    }
                }
            }
        }
        best
    }

    /// CSV with columns `q1,q2,q3,u,eps`; branches are separated by
    /// `# branch k` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q1,q2,q3,u,eps\n");
        for (k, b) in self.branches.iter().enumerate() {
            out.push_str(&format!("# branch {k}{}\n", if self.closed[k] { " closed" } else { "" }));
            let rows: Vec<[f64; 5]> = b.iter().map(|p| [p.q[0], p.q[1], p.q[2], p.u, p.eps]).collect();
            let t = csv_table(&[], &rows);
            out.push_str(t.trim_start_matches('\n'));
        }
        out
    }
}

/// Binodal curve of a normal form: the criminant at `ε = 0`, sampled over
/// `u` (C family) or `q₂` (B family). The grid is made odd so that the
/// origin is sampled on symmetric intervals.
pub fn binodal_from_normal_form(spec: &NormalFormSpec, grid: Grid1) -> Result<BinodalSlice, NormalFormError> {
    spec.check()?;
    grid.validate()?;
    let xs = grid.odd().values();
    let pt = |u: f64, q2: f64| complete(spec, u, 0.0, q2);
    if spec.is_b_family() {
        let branch: Vec<CriminantPoint> = xs.iter().filter_map(|&q2| pt(0.0, q2)).collect();
        return Ok(BinodalSlice { spec: *spec, branches: vec![branch], closed: vec![false] });
    }
    if number_of_sheets(spec) == 1 {
        let branch: Vec<CriminantPoint> =
            xs.iter().filter_map(|&u| q2_roots(spec, u, 0.0).and_then(|r| r.first().and_then(|&q2| pt(u, q2)))).collect();
        return Ok(BinodalSlice { spec: *spec, branches: vec![branch], closed: vec![false] });
    }
    Ok(two_sheet_slice(spec, &xs))
}

/// `Ĉ₃*` slice: `q₂² = −s(3u² + τ)` with `s` the sign of `q₂²`. Each maximal
/// `u`-run where this is nonnegative yields a loop (both ends interior), one
/// folded branch (one end interior) or two branches (no interior end).
fn two_sheet_slice(spec: &NormalFormSpec, xs: &[f64]) -> BinodalSlice {
    let s = spec.q2sq_sign();
    let tau = spec.tau;
    let r = |u: f64| -s * (3.0 * u * u + tau);
    let lo = xs[0];
    let hi = xs[xs.len() - 1];
    // exact turning points of the fold, where q₂ = 0
    let turning: Vec<f64> = if -tau / 3.0 >= 0.0 {
        let t = (-tau / 3.0).sqrt();
        if t == 0.0 {
            vec![0.0]
        } else {
            vec![-t, t]
        }
    } else {
        Vec::new()
    };
    let mut us: Vec<f64> = xs.to_vec();
    for &t in &turning {
        if t > lo && t < hi && !us.contains(&t) {
            us.push(t);
        }
    }
    us.sort_by(f64::total_cmp);
    let ok = |u: f64| r(u) >= 0.0 || turning.contains(&u);

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < us.len() {
        if ok(us[k]) {
            let start = k;
            while k + 1 < us.len() && ok(us[k + 1]) {
                k += 1;
            }
            runs.push((start, k));
        }
        k += 1;
    }
    let sheet = |u: f64, sign: f64| pt_on_sheet(spec, u, sign * r(u).max(0.0).sqrt());
    let mut branches = Vec::new();
    let mut closed = Vec::new();
    for (a, b) in runs {
        let seg = &us[a..=b];
        let left_open = a == 0;
        let right_open = b == us.len() - 1;
        let upper: Vec<CriminantPoint> = seg.iter().filter_map(|&u| sheet(u, 1.0)).collect();
        let lower: Vec<CriminantPoint> = seg.iter().filter_map(|&u| sheet(u, -1.0)).collect();
        if seg.len() == 1 {
            branches.push(upper);
            closed.push(false);
            continue;
        }
        match (left_open, right_open) {
            (true, true) => {
                branches.push(upper);
                closed.push(false);
                branches.push(lower);
                closed.push(false);
            }
            (false, false) => {
                // upper left→right, then lower right→left, sharing the turning points
                let mut b = upper;
                b.extend(lower.into_iter().rev().skip(1));
                b.pop();
                branches.push(b);
                closed.push(true);
            }
            (true, false) => {
                let mut b = upper;
                b.extend(lower.into_iter().rev().skip(1));
                branches.push(b);
                closed.push(false);
            }
            (false, true) => {
                let mut b: Vec<CriminantPoint> = lower.into_iter().rev().collect();
                b.extend(upper.into_iter().skip(1));
                branches.push(b);
                closed.push(false);
            }
        }
    }
    BinodalSlice { spec: *spec, branches, closed }
}

fn pt_on_sheet(spec: &NormalFormSpec, u: f64, q2: f64) -> Option<CriminantPoint> {
    complete(spec, u, 0.0, q2)
}

/// One frame of a `τ` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepFrame {
    pub tau: f64,
    pub patch: CriminantPatch,
    pub binodal: BinodalSlice,
}

impl SweepFrame {
    /// File stem `tau_<value>` with `-0` printed as `0`.
    pub fn file_stem(&self) -> String {
        let t = if self.tau == 0.0 { 0.0 } else { self.tau };
        format!("tau_{t}")
    }
}

/// Frames for each `τ`, in increasing `τ` order.
pub fn sweep_family(template: &NormalFormSpec, taus: &[f64], first: Grid1, eps: Grid1) -> Result<Vec<SweepFrame>, NormalFormError> {
    template.check()?;
    if !matches!(
        template.label,
        CaseLabel::B4hat | CaseLabel::C3starPlus | CaseLabel::C3starMinus | CaseLabel::C4hat | CaseLabel::C31hat | CaseLabel::F4hat
    ) {
        return Err(NormalFormError::NotAFamily(template.label));
    }
    let mut taus = taus.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.iter()
        .map(|&tau| {
            let spec = template.with_tau(tau);
            Ok(SweepFrame { tau, patch: criminant_numeric(&spec, first, eps)?, binodal: binodal_from_normal_form(&spec, first)? })
        })
        .collect()
}
