//! Surface patches as truncated Taylor jets.
//!
//! A patch is the graph `z = f(u, v)` over its tangent plane at the base
//! point, so the jet carries no constant or linear terms. Coefficients are
//! indexed `(i, j)` for the monomial `u^i v^j`; the degree is capped at 4.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tolerance::Tolerance;

/// Highest total degree a jet may carry.
pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("coefficient index ({i},{j}) has total degree {} outside {min}..={max}", i + j)]
    IndexOutOfRange { i: usize, j: usize, min: usize, max: usize },
    #[error("coefficient ({i},{j}) is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("derivative order ({0},{1}) exceeds jet degree {MAX_DEGREE}")]
    DerivativeOrder(usize, usize),
    #[error("quadratic part vanishes (flat umbilic): no asymptotic directions")]
    FlatUmbilic,
    #[error("jet is not parabolic (discriminant {0:e})")]
    NotParabolic(f64),
    #[error("{0}")]
    Precondition(String),
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Dense bivariate polynomial of total degree at most 4.
///
/// This is the unconstrained carrier behind [`SurfaceJet`] and the slices of
/// a [`FamilyJet`]; it may hold constant and linear terms.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Poly2 {
    c: [[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1],
}

impl fmt::Debug for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (i, j, c) in self.terms() {
            m.entry(&format!("{i}{j}"), &c);
        }
        m.finish()
    }
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > MAX_DEGREE {
            0.0
        } else {
            self.c[i][j]
        }
    }

    /// Nonzero terms in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=MAX_DEGREE).flat_map(move |d| {
            (0..=d)
                .rev()
                .map(move |i| (i, d - i, self.c[i][d - i]))
                .filter(|&(_, _, c)| c != 0.0)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.terms().fold(0.0, |m, (_, _, c)| m.max(c.abs()))
    }

    pub fn evaluate(&self, u: f64, v: f64) -> f64 {
        let mut upow = [1.0; MAX_DEGREE + 1];
        let mut vpow = [1.0; MAX_DEGREE + 1];
        for k in 1..=MAX_DEGREE {
            upow[k] = upow[k - 1] * u;
            vpow[k] = vpow[k - 1] * v;
        }
        let mut s = 0.0;
        for i in 0..=MAX_DEGREE {
            for j in 0..=(MAX_DEGREE - i) {
                let c = self.c[i][j];
                if c != 0.0 {
                    s += c * upow[i] * vpow[j];
                }
            }
        }
        s
    }

    /// Exact partial derivative `∂^{du+dv} / ∂u^du ∂v^dv` at `(u, v)`.
    pub fn partial(&self, du: usize, dv: usize, u: f64, v: f64) -> Result<f64, JetError> {
        if du + dv > MAX_DEGREE {
            return Err(JetError::DerivativeOrder(du, dv));
        }
        let mut s = 0.0;
        for i in du..=MAX_DEGREE {
            for j in dv..=(MAX_DEGREE - i) {
                let c = self.c[i][j];
                if c == 0.0 {
                    continue;
                }
                let k = factorial(i) / factorial(i - du) * factorial(j) / factorial(j - dv);
                s += c * k * u.powi((i - du) as i32) * v.powi((j - dv) as i32);
            }
        }
        Ok(s)
    }

    /// Homogeneous part of degree `d` evaluated on the direction `(a, b)`.
    pub fn form(&self, d: usize, a: f64, b: f64) -> f64 {
        (0..=d.min(MAX_DEGREE))
            .map(|i| self.coeff(i, d - i) * a.powi(i as i32) * b.powi((d - i) as i32))
            .sum()
    }

    /// Composition with the linear map `(u, v) = L (u', v')`, `L` row-major.
    pub fn compose_linear(&self, l: [[f64; 2]; 2]) -> Self {
        // (l00 u' + l01 v')^i (l10 u' + l11 v')^j expanded via binomials.
        let mut out = Self::zero();
        for (i, j, c) in self.terms() {
            let a = binomial_expand(l[0][0], l[0][1], i);
            let b = binomial_expand(l[1][0], l[1][1], j);
            for (p, ap) in a.iter().enumerate() {
                for (q, bq) in b.iter().enumerate() {
                    // a[p] multiplies u'^p v'^(i-p); b[q] multiplies u'^q v'^(j-q)
                    let ui = p + q;
                    let vj = (i - p) + (j - q);
                    out.c[ui][vj] += c * ap * bq;
                }
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = *self;
        for row in out.c.iter_mut() {
            for x in row.iter_mut() {
                *x *= lambda;
            }
        }
        out
    }

    pub fn add_scaled(&self, other: &Self, lambda: f64) -> Self {
        let mut out = *self;
        for i in 0..=MAX_DEGREE {
            for j in 0..=MAX_DEGREE {
                out.c[i][j] += lambda * other.c[i][j];
            }
        }
        out
    }
}

/// Coefficients of `(a x + b y)^n` as a list indexed by the power of `x`.
fn binomial_expand(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| factorial(n) / (factorial(k) * factorial(n - k)) * a.powi(k as i32) * b.powi((n - k) as i32))
        .collect()
}

/// A height function with derivatives up to second order, the interface the
/// bitangency solver consumes.
pub trait HeightFn {
    fn value(&self, u: f64, v: f64) -> f64;
    fn gradient(&self, u: f64, v: f64) -> [f64; 2];
    fn hessian(&self, u: f64, v: f64) -> [[f64; 2]; 2];
}

impl HeightFn for Poly2 {
    fn value(&self, u: f64, v: f64) -> f64 {
        self.evaluate(u, v)
    }

    fn gradient(&self, u: f64, v: f64) -> [f64; 2] {
        // orders are within degree, unwrap cannot fail
        [self.partial(1, 0, u, v).unwrap(), self.partial(0, 1, u, v).unwrap()]
    }

    fn hessian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        let uu = self.partial(2, 0, u, v).unwrap();
        let uv = self.partial(1, 1, u, v).unwrap();
        let vv = self.partial(0, 2, u, v).unwrap();
        [[uu, uv], [uv, vv]]
    }
}

/// Projective direction in a parameter plane, stored unit length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction2([f64; 2]);

impl Direction2 {
    pub fn new(a: f64, b: f64) -> Option<Self> {
        let n = a.hypot(b);
        if n > 0.0 && n.is_finite() {
            Some(Self([a / n, b / n]))
        } else {
            None
        }
    }

    pub fn components(&self) -> [f64; 2] {
        self.0
    }

    /// Sine of the angle between the two lines.
    pub fn sin_angle(&self, other: &Direction2) -> f64 {
        (self.0[0] * other.0[1] - self.0[1] * other.0[0]).abs()
    }

    pub fn is_parallel(&self, other: &Direction2, tol: f64) -> bool {
        self.sin_angle(other) <= tol
    }
}

/// Result of the cusp-of-Gauss test: the cubic invariant and the verdict.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuspTest {
    pub is_cusp: bool,
    /// `a³c₀₃ − a²b c₁₂ + ab² c₂₁ − b³ c₃₀` for the quadratic part written
    /// `±(a u + b v)²`, evaluated on the sign-normalized jet.
    pub margin: f64,
}

/// A patch `z = f(u, v)` with zero 1-jet, degree ≤ 4.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct SurfaceJet {
    poly: Poly2,
}

impl fmt::Debug for SurfaceJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SurfaceJet{:?}", self.poly)
    }
}

impl SurfaceJet {
    pub fn from_terms<I>(terms: I) -> Result<Self, JetError>
    where
        I: IntoIterator<Item = ((usize, usize), f64)>,
    {
        let mut poly = Poly2::zero();
        for ((i, j), c) in terms {
            if i + j < 2 || i + j > MAX_DEGREE {
                return Err(JetError::IndexOutOfRange { i, j, min: 2, max: MAX_DEGREE });
            }
            if !c.is_finite() {
                return Err(JetError::NonFinite { i, j });
            }
            poly.c[i][j] += c;
        }
        Ok(Self { poly })
    }

    /// Builds a jet from a polynomial, discarding nothing: fails if the
    /// polynomial has constant or linear terms.
    pub fn from_poly(poly: Poly2) -> Result<Self, JetError> {
        for (i, j, _) in poly.terms() {
            if i + j < 2 {
                return Err(JetError::IndexOutOfRange { i, j, min: 2, max: MAX_DEGREE });
            }
        }
        Ok(Self { poly })
    }

    pub fn poly(&self) -> &Poly2 {
        &self.poly
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.poly.coeff(i, j)
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.poly.terms()
    }

    /// `1 + max |coefficient|`, the scale used by tolerance predicates.
    pub fn scale(&self) -> f64 {
        1.0 + self.poly.max_abs()
    }

    pub fn evaluate(&self, u: f64, v: f64) -> f64 {
        self.poly.evaluate(u, v)
    }

    pub fn partial(&self, du: usize, dv: usize, u: f64, v: f64) -> Result<f64, JetError> {
        self.poly.partial(du, dv, u, v)
    }

    /// `f₁₁² − 4 f₂₀ f₀₂`: positive hyperbolic, negative elliptic.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c) = self.quadratic();
        b * b - 4.0 * a * c
    }

    /// `(f₂₀, f₁₁, f₀₂)`.
    pub fn quadratic(&self) -> (f64, f64, f64) {
        (self.coeff(2, 0), self.coeff(1, 1), self.coeff(0, 2))
    }

    pub fn is_parabolic(&self, tol: Tolerance) -> bool {
        tol.is_zero(self.discriminant(), self.scale())
    }

    /// Kernel directions of the second fundamental form at the base point.
    pub fn asymptotic_directions(&self, tol: Tolerance) -> Result<Vec<Direction2>, JetError> {
        let (a, b, c) = self.quadratic();
        let scale = self.scale();
        if tol.is_zero(a, scale) && tol.is_zero(b, scale) && tol.is_zero(c, scale) {
            return Err(JetError::FlatUmbilic);
        }
        let disc = b * b - 4.0 * a * c;
        if tol.is_zero(disc, scale) {
            // double root: kernel of the rank-one form
            let d = if c.abs() >= a.abs() {
                Direction2::new(2.0 * c, -b)
            } else {
                Direction2::new(b, -2.0 * a)
            };
            return Ok(d.into_iter().collect());
        }
        if disc < 0.0 {
            return Ok(Vec::new());
        }
        let sq = disc.sqrt();
        // roots of c t² + b t + a = 0 for d = (1, t), or a s² + b s + c = 0 for d = (s, 1)
        let (p, q, r, along_v) = if c.abs() >= a.abs() { (c, b, a, true) } else { (a, b, c, false) };
        let k = -0.5 * (q + q.signum() * sq);
        let (t1, t2) = if k != 0.0 { (k / p, r / k) } else { (sq / (2.0 * p), -sq / (2.0 * p)) };
        let mk = |t: f64| if along_v { Direction2::new(1.0, t) } else { Direction2::new(t, 1.0) };
        Ok([mk(t1), mk(t2)].into_iter().flatten().collect())
    }

    /// Writes the quadratic part as `s (a u + b v)²` with `s = ±1`, `b ≥ 0`.
    /// Returns `(s, a, b)`; meaningful only for parabolic jets.
    pub fn square_root_of_quadratic(&self) -> (f64, f64, f64) {
        let (q20, q11, q02) = self.quadratic();
        let s = if q02 != 0.0 { q02.signum() } else if q20 != 0.0 { q20.signum() } else { 1.0 };
        let b = (s * q02).max(0.0).sqrt();
        let a = if b > 0.0 { s * q11 / (2.0 * b) } else { (s * q20).max(0.0).sqrt() };
        (s, a, b)
    }

    /// The cubic invariant `a³c₀₃ − a²b c₁₂ + ab² c₂₁ − b³ c₃₀` of the
    /// sign-normalized jet. Zero exactly when the asymptotic direction is a
    /// root of the cubic terms.
    pub fn cubic_invariant(&self) -> f64 {
        let (s, a, b) = self.square_root_of_quadratic();
        // the asymptotic direction of (a u + b v)² is (b, -a); the invariant is -C(b, -a)
        -s * self.poly.form(3, b, -a)
    }

    pub fn is_cusp_of_gauss(&self, tol: Tolerance) -> Result<CuspTest, JetError> {
        let disc = self.discriminant();
        if !tol.is_zero(disc, self.scale()) {
            return Err(JetError::NotParabolic(disc));
        }
        let (q20, q11, q02) = self.quadratic();
        let scale = self.scale();
        if tol.is_zero(q20, scale) && tol.is_zero(q11, scale) && tol.is_zero(q02, scale) {
            return Err(JetError::FlatUmbilic);
        }
        let margin = self.cubic_invariant();
        Ok(CuspTest { is_cusp: tol.is_zero(margin, scale), margin })
    }

    /// True when the tie-line direction `(0, 1)` is asymptotic with at least
    /// four-point contact: `c₀₂ = c₀₃ = 0`.
    pub fn is_flecnodal_along_tie(&self, tol: Tolerance) -> bool {
        let s = self.scale();
        tol.is_zero(self.coeff(0, 2), s) && tol.is_zero(self.coeff(0, 3), s)
    }

    /// `f ∘ L` for the linear substitution `(u, v) = L (u', v')`.
    pub fn compose_linear(&self, l: [[f64; 2]; 2]) -> Self {
        Self { poly: self.poly.compose_linear(l) }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { poly: self.poly.scaled(lambda) }
    }

    /// Re-expresses the jet in the shear frame `v = w − a u`, `a = f₁₁ / 2f₀₂`,
    /// in which a parabolic quadratic part becomes `f₀₂ w²`.
    pub fn asymptotic_frame(&self) -> Result<Self, JetError> {
        let (_, q11, q02) = self.quadratic();
        if q02 == 0.0 {
            return Err(JetError::Precondition("f02 = 0: asymptotic direction lies along the tie line".into()));
        }
        let a = q11 / (2.0 * q02);
        Ok(self.compose_linear([[1.0, 0.0], [-a, 1.0]]))
    }
}

impl HeightFn for SurfaceJet {
    fn value(&self, u: f64, v: f64) -> f64 {
        self.poly.value(u, v)
    }
    fn gradient(&self, u: f64, v: f64) -> [f64; 2] {
        self.poly.gradient(u, v)
    }
    fn hessian(&self, u: f64, v: f64) -> [[f64; 2]; 2] {
        self.poly.hessian(u, v)
    }
}

/// A one-parameter family `f(u, v, τ) = base + τ·tau1 + τ²·tau2`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FamilyJet {
    pub base: SurfaceJet,
    tau1: Poly2,
    tau2: Poly2,
}

impl FamilyJet {
    pub fn new(base: SurfaceJet, tau1: Poly2, tau2: Poly2) -> Result<Self, JetError> {
        for p in [&tau1, &tau2] {
            for (i, j, _) in p.terms() {
                if i + j < 1 {
                    return Err(JetError::IndexOutOfRange { i, j, min: 1, max: MAX_DEGREE });
                }
            }
        }
        Ok(Self { base, tau1, tau2 })
    }

    pub fn from_base(base: SurfaceJet) -> Self {
        Self { base, ..Default::default() }
    }

    pub fn tau1(&self) -> &Poly2 {
        &self.tau1
    }

    pub fn tau2(&self) -> &Poly2 {
        &self.tau2
    }

    /// The fiber at `τ`; may carry linear terms when `τ ≠ 0`.
    pub fn at(&self, tau: f64) -> Poly2 {
        self.base.poly().add_scaled(&self.tau1, tau).add_scaled(&self.tau2, tau * tau)
    }

    pub fn evaluate(&self, u: f64, v: f64, tau: f64) -> f64 {
        self.at(tau).evaluate(u, v)
    }
}

/// Builds a [`Poly2`] with arbitrary (validated) index range.
pub fn poly_from_terms<I>(terms: I, min_degree: usize) -> Result<Poly2, JetError>
where
    I: IntoIterator<Item = ((usize, usize), f64)>,
{
    let mut p = Poly2::zero();
    for ((i, j), c) in terms {
        if i + j < min_degree || i + j > MAX_DEGREE {
            return Err(JetError::IndexOutOfRange { i, j, min: min_degree, max: MAX_DEGREE });
        }
        if !c.is_finite() {
            return Err(JetError::NonFinite { i, j });
        }
        p.c[i][j] += c;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(terms: &[((usize, usize), f64)]) -> SurfaceJet {
        SurfaceJet::from_terms(terms.iter().copied()).unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn evaluate_monomials() {
        let f = jet(&[((2, 0), 1.0), ((0, 2), 1.0)]);
        assert_eq!(f.evaluate(0.0, 0.0), 0.0);
        assert!((f.evaluate(0.1, 0.0) - 0.01).abs() < 1e-15);
        let h = jet(&[((2, 1), 2.0)]);
        assert!((h.evaluate(0.5, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn partial_derivatives() {
        let f = jet(&[((2, 0), 1.0), ((0, 2), 1.0)]);
        assert_eq!(f.partial(1, 0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(f.partial(2, 0, 0.3, -0.7).unwrap(), 2.0);
        let g = jet(&[((0, 2), 1.0), ((3, 0), 1.0)]);
        assert!((g.partial(1, 0, 0.2, 0.0).unwrap() - 0.12).abs() < 1e-15);
        assert_eq!(g.partial(3, 2, 0.0, 0.0), Err(JetError::DerivativeOrder(3, 2)));
    }

    #[test]
    fn rejects_low_order_terms() {
        assert!(SurfaceJet::from_terms([((1, 0), 1.0)]).is_err());
        assert!(SurfaceJet::from_terms([((0, 0), 1.0)]).is_err());
        assert!(SurfaceJet::from_terms([((3, 2), 1.0)]).is_err());
    }

    #[test]
    fn discriminant_signs() {
        assert_eq!(jet(&[((2, 0), 1.0), ((0, 2), 1.0)]).discriminant(), -4.0);
        assert_eq!(jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0)]).discriminant(), 0.0);
        assert_eq!(jet(&[((1, 1), 1.0)]).discriminant(), 1.0);
    }

    #[test]
    fn asymptotic_directions_cases() {
        let d = jet(&[((0, 2), 1.0), ((3, 0), 1.0)]).asymptotic_directions(tol()).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].is_parallel(&Direction2::new(1.0, 0.0).unwrap(), 1e-12));

        assert!(jet(&[((2, 0), 1.0), ((0, 2), 1.0)]).asymptotic_directions(tol()).unwrap().is_empty());

        let d = jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0), ((3, 0), 1.0)])
            .asymptotic_directions(tol())
            .unwrap();
        assert_eq!(d.len(), 1);
        assert!(d[0].is_parallel(&Direction2::new(1.0, -1.0).unwrap(), 1e-12));

        let hyp = jet(&[((2, 0), 1.0), ((1, 1), 0.5), ((0, 2), -2.0)]);
        let d = hyp.asymptotic_directions(tol()).unwrap();
        assert_eq!(d.len(), 2);
        for di in &d {
            let [a, b] = di.components();
            assert!(hyp.poly().form(2, a, b).abs() < 1e-12);
        }
        assert!(d[0].sin_angle(&d[1]) > 0.1);

        let flat = jet(&[((3, 0), 1.0)]);
        assert_eq!(flat.asymptotic_directions(tol()), Err(JetError::FlatUmbilic));
    }

    #[test]
    fn cusp_of_gauss_margins() {
        let g = jet(&[((0, 2), 1.0), ((3, 0), 1.0)]);
        let t = g.is_cusp_of_gauss(tol()).unwrap();
        assert!(!t.is_cusp);
        assert_eq!(t.margin, -1.0);

        let g = jet(&[((0, 2), 1.0), ((0, 3), 1.0)]);
        let t = g.is_cusp_of_gauss(tol()).unwrap();
        assert!(t.is_cusp);
        assert_eq!(t.margin, 0.0);

        // (u+v)² + u³: a = b = 1
        let f = jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0), ((3, 0), 1.0)]);
        let t = f.is_cusp_of_gauss(tol()).unwrap();
        assert!(!t.is_cusp);
        assert!((t.margin + 1.0).abs() < 1e-15);

        let e = jet(&[((2, 0), 1.0), ((0, 2), 1.0)]);
        assert!(matches!(e.is_cusp_of_gauss(tol()), Err(JetError::NotParabolic(_))));
    }

    #[test]
    fn flecnodal_along_tie() {
        assert!(jet(&[((2, 0), 1.0), ((0, 4), 1.0)]).is_flecnodal_along_tie(tol()));
        assert!(!jet(&[((2, 0), 1.0), ((0, 3), 1.0)]).is_flecnodal_along_tie(tol()));
        assert!(!jet(&[((2, 0), 1.0), ((0, 2), 1.0)]).is_flecnodal_along_tie(tol()));
    }

    #[test]
    fn compose_linear_matches_pointwise() {
        let f = jet(&[((2, 0), 0.3), ((1, 1), -1.2), ((3, 0), 0.7), ((1, 2), 2.0), ((2, 2), -0.4), ((0, 4), 1.1)]);
        let l = [[0.8, -0.3], [0.5, 1.7]];
        let g = f.compose_linear(l);
        for &(a, b) in &[(0.1, 0.2), (-0.3, 0.05), (0.4, -0.4)] {
            let (u, v) = (l[0][0] * a + l[0][1] * b, l[1][0] * a + l[1][1] * b);
            assert!((g.evaluate(a, b) - f.evaluate(u, v)).abs() < 1e-14);
        }
    }

    #[test]
    fn family_at_zero_is_base() {
        let base = jet(&[((2, 0), 1.0), ((0, 2), 1.0)]);
        let t1 = poly_from_terms([((1, 0), 2.0), ((0, 3), 1.0)], 1).unwrap();
        let fam = FamilyJet::new(base, t1, Poly2::zero()).unwrap();
        assert_eq!(fam.at(0.0), *base.poly());
        assert!((fam.evaluate(0.5, 0.0, 0.1) - (0.25 + 0.1)).abs() < 1e-15);
        assert!(FamilyJet::new(base, poly_from_terms([((0, 0), 1.0)], 0).unwrap(), Poly2::zero()).is_err());
    }
}
