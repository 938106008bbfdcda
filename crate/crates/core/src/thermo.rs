//! Van der Waals fluids: isotherms, Helmholtz energy, coexistence and
//! binary mixtures fed into the bitangent tracer.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitangent::{trace_from, BinodalCurve, ContactPair, TraceError, TraceOptions};
use crate::export::{csv_table, Mesh};
use crate::jets::{poly_from_terms, HeightFn, SurfaceJet, MAX_DEGREE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("volume {v} is not above the covolume {b}")]
    BelowCovolume { v: f64, b: f64 },
    #[error("composition {0} is outside [0, 1]")]
    Composition(f64),
    #[error("T = {t} is not below the critical temperature {tc}; no coexistence")]
    Supercritical { t: f64, tc: f64 },
    #[error("{what} did not converge; bracket [{lo}, {hi}]")]
    NonConvergence { what: &'static str, lo: f64, hi: f64 },
    #[error("expansion point too close to the covolume singularity (|Hessian| = {0:e})")]
    NearSingularity(f64),
    #[error("no common tangent plane found: {0}")]
    NoSeed(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Single-component van der Waals constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

impl FluidParams {
    pub fn new(a: f64, b: f64, r: f64) -> Result<Self, ThermoError> {
        // a = 0 is the ideal-gas limit and still admits isotherms
        if !(a >= 0.0 && b > 0.0 && r > 0.0 && a.is_finite() && b.is_finite() && r.is_finite()) {
            return Err(ThermoError::InvalidParams(format!("a = {a}, b = {b}, R = {r}")));
        }
        Ok(Self { a, b, r })
    }

    /// Units in which the critical point is `(T, V, P) = (1, 1, 1)`.
    pub fn reduced() -> Self {
        Self { a: 3.0, b: 1.0 / 3.0, r: 8.0 / 3.0 }
    }

    fn check_volume(&self, v: f64) -> Result<(), ThermoError> {
        if v > self.b && v.is_finite() {
            Ok(())
        } else {
            Err(ThermoError::BelowCovolume { v, b: self.b })
        }
    }
}

pub fn vdw_pressure(v: f64, t: f64, p: &FluidParams) -> Result<f64, ThermoError> {
    p.check_volume(v)?;
    Ok(p.r * t / (v - p.b) - p.a / (v * v))
}

/// `A = −RT ln(V − b) − a/V`, so that `A_V = −P`.
pub fn helmholtz_single(v: f64, t: f64, p: &FluidParams) -> Result<f64, ThermoError> {
    p.check_volume(v)?;
    Ok(-p.r * t * (v - p.b).ln() - p.a / v)
}

/// `(A_V, A_VV, A_VVV)`.
pub fn helmholtz_single_derivatives(v: f64, t: f64, p: &FluidParams) -> Result<[f64; 3], ThermoError> {
    p.check_volume(v)?;
    let rt = p.r * t;
    let d = v - p.b;
    Ok([-rt / d + p.a / (v * v), rt / (d * d) - 2.0 * p.a / v.powi(3), -2.0 * rt / d.powi(3) + 6.0 * p.a / v.powi(4)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t: f64,
    pub v: f64,
    pub p: f64,
}

/// Common root of `A_VV` and `A_VVV`: `V = 3b`, `T = 8a/(27bR)`, `P = a/(27b²)`.
pub fn critical_point(p: &FluidParams) -> CriticalPoint {
    CriticalPoint { t: 8.0 * p.a / (27.0 * p.b * p.r), v: 3.0 * p.b, p: p.a / (27.0 * p.b * p.b) }
}

fn check_subcritical(t: f64, p: &FluidParams) -> Result<CriticalPoint, ThermoError> {
    let c = critical_point(p);
    if !(t > 0.0 && t < c.t * (1.0 - 1e-12)) {
        return Err(ThermoError::Supercritical { t, tc: c.t });
    }
    Ok(c)
}

/// Bisection to full precision; `f(lo)` and `f(hi)` must differ in sign.
fn bisect(mut lo: f64, mut hi: f64, what: &'static str, f: impl Fn(f64) -> f64) -> Result<f64, ThermoError> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    if flo.signum() == f(hi).signum() {
        return Err(ThermoError::NonConvergence { what, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First `hi = start·2^k` with `f(hi) < 0`.
fn grow_until_negative(start: f64, what: &'static str, f: impl Fn(f64) -> f64) -> Result<f64, ThermoError> {
    let mut hi = start;
    for _ in 0..200 {
        if f(hi) < 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(ThermoError::NonConvergence { what, lo: start, hi })
}

/// Roots `V₋ < V₊` of `P_V = 0`; the isotherm is unstable between them.
pub fn spinodal_single(t: f64, p: &FluidParams) -> Result<(f64, f64), ThermoError> {
    let c = check_subcritical(t, p)?;
    let rt = p.r * t;
    // sign of P_V·V³(V−b)²: positive exactly on the unstable interval
    let h = |v: f64| 2.0 * p.a * (v - p.b).powi(2) - rt * v.powi(3);
    let lo = bisect(p.b, c.v, "spinodal (liquid side)", h)?;
    let top = grow_until_negative(2.0 * c.v, "spinodal bracket", h)?;
    let hi = bisect(c.v, top, "spinodal (vapour side)", h)?;
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceResult {
    pub v_liq: f64,
    pub v_vap: f64,
    pub p_tie: f64,
    /// `∫ (P(V) − P_tie) dV` over `[V_liq, V_vap]`, by adaptive quadrature.
    pub equal_area_residual: f64,
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Outer intersections of the isotherm with the level `P = level`.
fn outer_volumes(level: f64, t: f64, p: &FluidParams, spin: (f64, f64)) -> Result<(f64, f64), ThermoError> {
    let f = |v: f64| vdw_pressure(v, t, p).map_or(f64::INFINITY, |x| x - level);
    let vl = bisect(p.b * (1.0 + 1e-15) + f64::MIN_POSITIVE, spin.0, "liquid volume", f)?;
    let top = grow_until_negative(2.0 * spin.1, "vapour bracket", f)?;
    let vv = bisect(spin.1, top, "vapour volume", f)?;
    Ok((vl, vv))
}

/// Equal-area rule: bisection on the tie pressure. Returns `(V_liq, V_vap, P_tie)`.
pub fn equal_area_bisection(t: f64, p: &FluidParams) -> Result<(f64, f64, f64), ThermoError> {
    check_subcritical(t, p)?;
    let spin = spinodal_single(t, p)?;
    let p_lo = vdw_pressure(spin.0, t, p)?.max(0.0);
    let p_hi = vdw_pressure(spin.1, t, p)?;
    // area between the isotherm and the level, from the antiderivative −A − P·V
    let area = |level: f64| -> f64 {
        match outer_volumes(level, t, p, spin) {
            Ok((vl, vv)) => {
                let a = |v| helmholtz_single(v, t, p).unwrap_or(f64::NAN);
                -(a(vv) - a(vl)) - level * (vv - vl)
            }
            Err(_) => f64::NAN,
        }
    };
    let eps = 1e-14 * p_hi.abs().max(1.0);
    let level = bisect(p_lo + eps, p_hi - eps, "equal-area tie pressure", |x| {
        let r = area(x);
        if r.is_nan() {
            1.0
        } else {
            r
        }
    })?;
    let (vl, vv) = outer_volumes(level, t, p, spin)?;
    Ok((vl, vv, level))
}

/// Newton on the double-tangent conditions for the Helmholtz curve,
/// `A_V(V₁) = A_V(V₂) = (A(V₂) − A(V₁))/(V₂ − V₁)`.
pub fn double_tangent_newton(t: f64, p: &FluidParams, guess: (f64, f64)) -> Result<(f64, f64, f64), ThermoError> {
    let a = |v: f64| helmholtz_single(v, t, p);
    let d = |v: f64| helmholtz_single_derivatives(v, t, p);
    let (mut v1, mut v2) = guess;
    for _ in 0..100 {
        let (a1, a2) = (a(v1)?, a(v2)?);
        let ([s1, c1, _], [s2, c2, _]) = (d(v1)?, d(v2)?);
        // r1 = A_V(V₁) − A_V(V₂), r2 = A(V₂) − A(V₁) − A_V(V₁)(V₂ − V₁)
        let r = [s1 - s2, a2 - a1 - s1 * (v2 - v1)];
        let j = [[c1, -c2], [-c1 * (v2 - v1), s2 - s1]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dv1 = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dv2 = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut lam = 1.0;
        while v1 - lam * dv1 <= p.b && lam > 1e-6 {
            lam *= 0.5;
        }
        v1 -= lam * dv1;
        v2 -= lam * dv2;
        if dv1.abs() <= 1e-15 * v1 && dv2.abs() <= 1e-15 * v2 {
            return Ok((v1, v2, -d(v1)?[0]));
        }
    }
    let (s1, s2) = (d(v1)?[0], d(v2)?[0]);
    if (s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0) {
        return Ok((v1, v2, -s1));
    }
    Err(ThermoError::NonConvergence { what: "double-tangent Newton", lo: v1, hi: v2 })
}

/// Coexisting liquid and vapour volumes at a subcritical temperature.
pub fn maxwell_construction(t: f64, p: &FluidParams, tol: f64) -> Result<CoexistenceResult, ThermoError> {
    let (vl, vv, _) = equal_area_bisection(t, p)?;
    let (vl, vv, p_tie) = double_tangent_newton(t, p, (vl, vv))?;
    let integrand = |v: f64| vdw_pressure(v, t, p).unwrap_or(f64::NAN) - p_tie;
    let residual = adaptive_simpson(&integrand, vl, vv, 1e-10_f64.min(tol * 0.1));
    if !(vl < vv && vl > p.b) {
        return Err(ThermoError::NonConvergence { what: "Maxwell construction", lo: vl, hi: vv });
    }
    if residual.abs() > tol {
        return Err(ThermoError::NonConvergence { what: "equal-area residual", lo: vl, hi: vv });
    }
    Ok(CoexistenceResult { v_liq: vl, v_vap: vv, p_tie, equal_area_residual: residual })
}

/// Rows `(V, P, A)` on an isotherm.
pub fn isotherm_table(t: f64, p: &FluidParams, v_min: f64, v_max: f64, count: usize) -> Result<Vec<[f64; 3]>, ThermoError> {
    if count < 2 || !(v_min < v_max) {
        return Err(ThermoError::InvalidParams(format!("volume range [{v_min}, {v_max}] with {count} samples")));
    }
    (0..count)
        .map(|k| {
            let v = v_min + (v_max - v_min) * k as f64 / (count - 1) as f64;
            Ok([v, vdw_pressure(v, t, p)?, helmholtz_single(v, t, p)?])
        })
        .collect()
}

pub const ISOTHERM_HEADER: [&str; 3] = ["V", "P", "A"];
pub const COEXISTENCE_HEADER: [&str; 5] = ["T", "V_liq", "V_vap", "P_tie", "residual"];
pub const MIXTURE_BINODAL_HEADER: [&str; 7] = ["s", "V1", "x1", "V2", "x2", "P", "mu_resid"];

pub fn coexistence_csv(rows: &[(f64, CoexistenceResult)]) -> String {
    let r: Vec<[f64; 5]> = rows.iter().map(|(t, c)| [*t, c.v_liq, c.v_vap, c.p_tie, c.equal_area_residual]).collect();
    csv_table(&COEXISTENCE_HEADER, &r)
}

/// Binary mixture with the one-fluid mixing rule
/// `a(x) = a₁x² + 2a₁₂x(1−x) + a₂(1−x)²`, `b(x) = b₁x + b₂(1−x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
    pub b1: f64,
    pub b2: f64,
    pub r: f64,
}

impl MixtureParams {
    pub fn new(a1: f64, a2: f64, a12: f64, b1: f64, b2: f64, r: f64) -> Result<Self, ThermoError> {
        let all = [a1, a2, a12, b1, b2, r];
        if !all.iter().all(|x| x.is_finite() && *x > 0.0) {
            return Err(ThermoError::InvalidParams(format!("{all:?}")));
        }
        Ok(Self { a1, a2, a12, b1, b2, r })
    }

    pub fn a_of(&self, x: f64) -> f64 {
        self.a1 * x * x + 2.0 * self.a12 * x * (1.0 - x) + self.a2 * (1.0 - x) * (1.0 - x)
    }

    /// `(a', a'')`.
    pub fn a_derivs(&self, x: f64) -> (f64, f64) {
        let d1 = 2.0 * self.a1 * x + 2.0 * self.a12 * (1.0 - 2.0 * x) - 2.0 * self.a2 * (1.0 - x);
        (d1, 2.0 * (self.a1 - 2.0 * self.a12 + self.a2))
    }

    pub fn b_of(&self, x: f64) -> f64 {
        self.b1 * x + self.b2 * (1.0 - x)
    }

    pub fn db(&self) -> f64 {
        self.b1 - self.b2
    }

    /// The pure fluid at composition `x`.
    pub fn fluid_at(&self, x: f64) -> FluidParams {
        FluidParams { a: self.a_of(x), b: self.b_of(x), r: self.r }
    }

    fn check(&self, v: f64, x: f64) -> Result<(), ThermoError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ThermoError::Composition(x));
        }
        let b = self.b_of(x);
        if !(v > b && v.is_finite()) {
            return Err(ThermoError::BelowCovolume { v, b });
        }
        Ok(())
    }
}

/// `x ln x` with its limit 0 at `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `A(V, x) = −RT ln(V − b(x)) − a(x)/V + RT(x ln x + (1−x) ln(1−x))`.
pub fn mixture_helmholtz(v: f64, x: f64, t: f64, m: &MixtureParams) -> Result<f64, ThermoError> {
    m.check(v, x)?;
    let rt = m.r * t;
    Ok(-rt * (v - m.b_of(x)).ln() - m.a_of(x) / v + rt * (xlogx(x) + xlogx(1.0 - x)))
}

pub fn mixture_pressure(v: f64, x: f64, t: f64, m: &MixtureParams) -> Result<f64, ThermoError> {
    m.check(v, x)?;
    Ok(m.r * t / (v - m.b_of(x)) - m.a_of(x) / (v * v))
}

/// Value, gradient and Hessian of the mixture Helmholtz energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureDerivs {
    pub a: f64,
    pub a_v: f64,
    pub a_x: f64,
    pub a_vv: f64,
    pub a_vx: f64,
    pub a_xx: f64,
}

impl MixtureDerivs {
    /// `A − V·A_V − x·A_x`, the tangent plane's intercept with the `A` axis.
    pub fn intercept(&self, v: f64, x: f64) -> f64 {
        self.a - v * self.a_v - x * self.a_x
    }

    pub fn hessian_det(&self) -> f64 {
        self.a_vv * self.a_xx - self.a_vx * self.a_vx
    }
}

/// Analytic partials; requires `0 < x < 1`.
pub fn mixture_derivatives(v: f64, x: f64, t: f64, m: &MixtureParams) -> Result<MixtureDerivs, ThermoError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(ThermoError::Composition(x));
    }
    m.check(v, x)?;
    let rt = m.r * t;
    let d = v - m.b_of(x);
    let (a, db) = (m.a_of(x), m.db());
    let (da, dda) = m.a_derivs(x);
    Ok(MixtureDerivs {
        a: mixture_helmholtz(v, x, t, m)?,
        a_v: -rt / d + a / (v * v),
        a_x: rt * db / d - da / v + rt * (x / (1.0 - x)).ln(),
        a_vv: rt / (d * d) - 2.0 * a / v.powi(3),
        a_vx: -rt * db / (d * d) + da / (v * v),
        a_xx: rt * db * db / (d * d) - dda / v + rt * (1.0 / x + 1.0 / (1.0 - x)),
    })
}

/// Affine chart `(s, t) ↦ origin + s·e_s + t·e_t` of the `(V, x)` plane,
/// together with a plane subtracted from `A`. The two base points sit at
/// `(0, 0)` and `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureChart {
    pub origin: [f64; 2],
    pub e_s: [f64; 2],
    pub e_t: [f64; 2],
    /// `A ≈ plane[0] + plane[1]·(V − V₀) + plane[2]·(x − x₀)` at the origin.
    pub plane: [f64; 3],
}

impl MixtureChart {
    /// Chart with `p1 ↦ (0, 0)`, `p2 ↦ (0, 1)` and the `s` axis along
    /// composition, scaled by `x_scale`. The subtracted plane is the tangent
    /// plane at `p1`.
    pub fn through(p1: [f64; 2], p2: [f64; 2], x_scale: f64, t: f64, m: &MixtureParams) -> Result<Self, ThermoError> {
        let e_t = [p2[0] - p1[0], p2[1] - p1[1]];
        if e_t[0].abs() < 1e-12 * (1.0 + p1[0].abs()) {
            return Err(ThermoError::InvalidParams("base points must differ in volume".into()));
        }
        let d = mixture_derivatives(p1[0], p1[1], t, m)?;
        Ok(Self { origin: p1, e_s: [0.0, x_scale], e_t, plane: [d.a, d.a_v, d.a_x] })
    }

    /// Chart centred on one point with `s` along `x` and `t` along `V`.
    pub fn at_point(p0: [f64; 2], t: f64, m: &MixtureParams) -> Result<Self, ThermoError> {
        let d = mixture_derivatives(p0[0], p0[1], t, m)?;
        Ok(Self { origin: p0, e_s: [0.0, 1.0], e_t: [1.0, 0.0], plane: [d.a, d.a_v, d.a_x] })
    }

    pub fn to_vx(&self, s: f64, t: f64) -> [f64; 2] {
        [self.origin[0] + s * self.e_s[0] + t * self.e_t[0], self.origin[1] + s * self.e_s[1] + t * self.e_t[1]]
    }

    fn plane_at(&self, p: [f64; 2]) -> f64 {
        self.plane[0] + self.plane[1] * (p[0] - self.origin[0]) + self.plane[2] * (p[1] - self.origin[1])
    }
}

/// Height function of the mixture surface in a chart, with `t` offset by
/// `t_offset` (0 for the first patch, 1 for the second).
#[derive(Clone, Copy, Debug)]
pub struct MixturePatch {
    pub chart: MixtureChart,
    pub t_offset: f64,
    pub temperature: f64,
    pub params: MixtureParams,
}

impl MixturePatch {
    fn derivs(&self, s: f64, t: f64) -> Option<(MixtureDerivs, [f64; 2])> {
        let p = self.chart.to_vx(s, t + self.t_offset);
        mixture_derivatives(p[0], p[1], self.temperature, &self.params).ok().map(|d| (d, p))
    }
}

impl HeightFn for MixturePatch {
    fn value(&self, s: f64, t: f64) -> f64 {
        self.derivs(s, t).map_or(f64::NAN, |(d, p)| d.a - self.chart.plane_at(p))
    }

    fn gradient(&self, s: f64, t: f64) -> [f64; 2] {
        let Some((d, _)) = self.derivs(s, t) else { return [f64::NAN; 2] };
        let (gv, gx) = (d.a_v - self.chart.plane[1], d.a_x - self.chart.plane[2]);
        let (es, et) = (self.chart.e_s, self.chart.e_t);
        [gv * es[0] + gx * es[1], gv * et[0] + gx * et[1]]
    }

    fn hessian(&self, s: f64, t: f64) -> [[f64; 2]; 2] {
        let Some((d, _)) = self.derivs(s, t) else { return [[f64::NAN; 2]; 2] };
        let q = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] * d.a_vv + (a[0] * b[1] + a[1] * b[0]) * d.a_vx + a[1] * b[1] * d.a_xx;
        let (es, et) = (self.chart.e_s, self.chart.e_t);
        let st = q(es, et);
        [[q(es, es), st], [st, q(et, et)]]
    }
}

/// Truncated bivariate Taylor series of total degree ≤ 4.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Series([[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1]);

impl Series {
    fn constant(c: f64) -> Self {
        let mut s = Series([[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1]);
        s.0[0][0] = c;
        s
    }

    fn linear(c: f64, ds: f64, dt: f64) -> Self {
        let mut s = Self::constant(c);
        s.0[1][0] = ds;
        s.0[0][1] = dt;
        s
    }

    fn add(&self, o: &Series, k: f64) -> Series {
        let mut r = *self;
        for i in 0..=MAX_DEGREE {
            for j in 0..=MAX_DEGREE - i {
                r.0[i][j] += k * o.0[i][j];
            }
        }
        r
    }

    fn mul(&self, o: &Series) -> Series {
        let mut r = Series::constant(0.0);
        for i in 0..=MAX_DEGREE {
            for j in 0..=MAX_DEGREE - i {
                if self.0[i][j] == 0.0 {
                    continue;
                }
                for k in 0..=MAX_DEGREE - i - j {
                    for l in 0..=MAX_DEGREE - i - j - k {
                        r.0[i + k][j + l] += self.0[i][j] * o.0[k][l];
                    }
                }
            }
        }
        r
    }

    /// `Σ c_k·(self − self₀)^k` for the given Taylor coefficients of an
    /// outer function about `self₀`.
    fn compose(&self, coeffs: [f64; MAX_DEGREE + 1]) -> Series {
        let mut p = *self;
        p.0[0][0] = 0.0;
        let mut out = Series::constant(coeffs[0]);
        let mut pk = Series::constant(1.0);
        for c in coeffs.iter().skip(1) {
            pk = pk.mul(&p);
            out = out.add(&pk, *c);
        }
        out
    }

    fn ln(&self) -> Series {
        let c = self.0[0][0];
        self.compose([c.ln(), 1.0 / c, -0.5 / c.powi(2), 1.0 / (3.0 * c.powi(3)), -0.25 / c.powi(4)])
    }

    fn recip(&self) -> Series {
        let c = self.0[0][0];
        self.compose([1.0 / c, -1.0 / c.powi(2), 1.0 / c.powi(3), -1.0 / c.powi(4), 1.0 / c.powi(5)])
    }
}

/// Degree-4 Taylor jet of the chart height function at `(0, t_offset)`.
///
/// The tangent plane at the base point is subtracted, so the jet has no
/// constant or linear part when the chart's plane is that tangent plane.
pub fn mixture_jet(patch: &MixturePatch) -> Result<SurfaceJet, ThermoError> {
    let c = &patch.chart;
    let m = &patch.params;
    let p0 = c.to_vx(0.0, patch.t_offset);
    let d0 = mixture_derivatives(p0[0], p0[1], patch.temperature, m)?;
    let hess = d0.a_vv.abs().max(d0.a_vx.abs()).max(d0.a_xx.abs());
    let gap = p0[0] - m.b_of(p0[1]);
    if !hess.is_finite() || hess > 1e12 || gap < 1e-9 * p0[0].abs() {
        return Err(ThermoError::NearSingularity(hess));
    }
    let rt = m.r * patch.temperature;
    let v = Series::linear(p0[0], c.e_s[0], c.e_t[0]);
    let x = Series::linear(p0[1], c.e_s[1], c.e_t[1]);
    let one_minus_x = Series::constant(1.0).add(&x, -1.0);
    let b = Series::constant(m.b2).add(&x, m.db());
    let (da, dda) = m.a_derivs(p0[1]);
    let dx = Series::linear(0.0, c.e_s[1], c.e_t[1]);
    let a = Series::constant(m.a_of(p0[1])).add(&dx, da).add(&dx.mul(&dx), 0.5 * dda);
    let total = Series::constant(0.0)
        .add(&v.add(&b, -1.0).ln(), -rt)
        .add(&a.mul(&v.recip()), -1.0)
        .add(&x.mul(&x.ln()), rt).add(&one_minus_x.mul(&one_minus_x.ln()), rt);

    // the chart's plane is affine in (s, t): only the constant and linear parts change
    let plane0 = c.plane_at(p0);
    let lin = [
        c.plane[1] * c.e_s[0] + c.plane[2] * c.e_s[1],
        c.plane[1] * c.e_t[0] + c.plane[2] * c.e_t[1],
    ];
    let residual_lin = [total.0[1][0] - lin[0], total.0[0][1] - lin[1], total.0[0][0] - plane0];
    let scale = 1.0 + total.0[0][0].abs() + d0.a_v.abs() + d0.a_x.abs();
    if residual_lin.iter().any(|r| r.abs() > 1e-8 * scale) {
        return Err(ThermoError::InvalidParams("chart plane is not tangent at the expansion point".into()));
    }
    let mut terms = Vec::new();
    for i in 0..=MAX_DEGREE {
        for j in 0..=MAX_DEGREE - i {
            if i + j >= 2 && total.0[i][j] != 0.0 {
                terms.push(((i, j), total.0[i][j]));
            }
        }
    }
    let poly = poly_from_terms(terms, 2).map_err(|e| ThermoError::InvalidParams(e.to_string()))?;
    SurfaceJet::from_poly(poly).map_err(|e| ThermoError::InvalidParams(e.to_string()))
}

/// Points `(V₁, x₁)` and `(V₂, x₂)` sharing a tangent plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPair {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
}

/// `(ΔA_V, ΔA_x, Δintercept)` between the two points.
pub fn common_tangent_residual(p1: [f64; 2], p2: [f64; 2], t: f64, m: &MixtureParams) -> Result<[f64; 3], ThermoError> {
    let d1 = mixture_derivatives(p1[0], p1[1], t, m)?;
    let d2 = mixture_derivatives(p2[0], p2[1], t, m)?;
    Ok([d1.a_v - d2.a_v, d1.a_x - d2.a_x, d1.intercept(p1[0], p1[1]) - d2.intercept(p2[0], p2[1])])
}

/// A common tangent plane with the first point at composition `x1`.
///
/// The start is the pure-fluid Maxwell pair for the mixture at `x1`; Newton
/// then adjusts `(V₁, V₂, x₂)`.
pub fn find_seed(t: f64, m: &MixtureParams, x1: f64) -> Result<SeedPair, ThermoError> {
    if !(x1 > 0.0 && x1 < 1.0) {
        return Err(ThermoError::Composition(x1));
    }
    let c = maxwell_construction(t, &m.fluid_at(x1), 1e-6).map_err(|e| ThermoError::NoSeed(format!("at x = {x1}: {e}")))?;
    let mut z = Vector3::new(c.v_liq, c.v_vap, x1);
    for _ in 0..60 {
        let (p1, p2) = ([z[0], x1], [z[1], z[2]]);
        let r = common_tangent_residual(p1, p2, t, m).map_err(|e| ThermoError::NoSeed(e.to_string()))?;
        let r = Vector3::from(r);
        let scale = 1.0 + c.p_tie.abs();
        if r.norm() <= 1e-13 * scale {
            return Ok(SeedPair { p1, p2 });
        }
        let d1 = mixture_derivatives(p1[0], p1[1], t, m)?;
        let d2 = mixture_derivatives(p2[0], p2[1], t, m)?;
        // columns: ∂/∂V₁, ∂/∂V₂, ∂/∂x₂
        let jac = Matrix3::new(
            d1.a_vv,
            -d2.a_vv,
            -d2.a_vx,
            d1.a_vx,
            -d2.a_vx,
            -d2.a_xx,
            -p1[0] * d1.a_vv - p1[1] * d1.a_vx,
            p2[0] * d2.a_vv + p2[1] * d2.a_vx,
            p2[0] * d2.a_vx + p2[1] * d2.a_xx,
        );
        let Some(step) = jac.lu().solve(&r) else { break };
        let mut lam = 1.0;
        loop {
            let zn = z - lam * step;
            let ok = zn[2] > 0.0 && zn[2] < 1.0 && zn[0] > m.b_of(x1) && zn[1] > m.b_of(zn[2]);
            if ok || lam < 1e-8 {
                z = zn;
                break;
            }
            lam *= 0.5;
        }
    }
    Err(ThermoError::NoSeed(format!("Newton did not converge from the Maxwell pair at x = {x1}")))
}

/// A traced mixture binodal mapped back to `(V, x)`.
#[derive(Clone, Debug)]
pub struct MixtureBinodal {
    pub chart: MixtureChart,
    pub curve: BinodalCurve,
    /// `(V₁, x₁, V₂, x₂)` per curve point.
    pub pairs: Vec<[f64; 4]>,
    pub warnings: Vec<String>,
}

impl MixtureBinodal {
    /// Per point: `max(|ΔP|, |ΔA_x|, |Δintercept|)`.
    pub fn residuals(&self, t: f64, m: &MixtureParams) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|q| {
                common_tangent_residual([q[0], q[1]], [q[2], q[3]], t, m)
                    .map_or(f64::NAN, |r| r.iter().fold(0.0f64, |a, x| a.max(x.abs())))
            })
            .collect()
    }

    pub fn to_csv(&self, t: f64, m: &MixtureParams) -> String {
        let res = self.residuals(t, m);
        let rows: Vec<[f64; 7]> = self
            .pairs
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let p = mixture_pressure(q[0], q[1], t, m).unwrap_or(f64::NAN);
                [self.curve.signed_arclength(k), q[0], q[1], q[2], q[3], p, res[k]]
            })
            .collect();
        csv_table(&MIXTURE_BINODAL_HEADER, &rows)
    }
}

/// Traces the mixture binodal through a seed pair. Tracing runs on the
/// exact Helmholtz surface in the chart through the seed pair, with the
/// chart's `s` axis along composition scaled by `x_scale`.
pub fn mixture_binodal(t: f64, m: &MixtureParams, seed: SeedPair, x_scale: f64, opts: &TraceOptions) -> Result<MixtureBinodal, ThermoError> {
    let chart = MixtureChart::through(seed.p1, seed.p2, x_scale, t, m)?;
    let f = MixturePatch { chart, t_offset: 0.0, temperature: t, params: *m };
    let g = MixturePatch { t_offset: 1.0, ..f };
    let out = trace_from(ContactPair::ORIGIN, &f, &g, opts)?;
    let curve = out.curves.into_iter().next().ok_or_else(|| ThermoError::NoSeed("seed is an isolated point".into()))?;
    let pairs = curve
        .points
        .iter()
        .map(|c| {
            let a = chart.to_vx(c.u, c.v);
            let b = chart.to_vx(c.x, 1.0 + c.y);
            [a[0], a[1], b[0], b[1]]
        })
        .collect();
    Ok(MixtureBinodal { chart, curve, pairs, warnings: out.warnings })
}

/// Graph of `A(V, x)` over a window; samples outside the domain are left out.
pub fn mixture_surface_mesh(t: f64, m: &MixtureParams, v_range: (f64, f64), x_range: (f64, f64), n: usize) -> Mesh {
    let n = n.max(2);
    let mut grid = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let v = v_range.0 + (v_range.1 - v_range.0) * j as f64 / (n - 1) as f64;
            grid.push(mixture_helmholtz(v, x, t, m).ok().map(|a| [v, x, a]));
        }
    }
    Mesh::from_grid(n, n, &grid)
}
