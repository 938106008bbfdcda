//! The bitangency variety of two patches and its continuation.
//!
//! With `M = (u, v, f(u, v))` and `N = (x, 1 + y, g(x, y))`, the tangent
//! planes at `M` and `N` coincide iff
//!
//! ```text
//! H₁ = f_u − g_x,  H₂ = f_v − g_y,  H₃ = (x − u) f_u + (1 + y − v) f_v + f − g
//! ```
//!
//! all vanish. The zero set is generically a curve in `(u, v, x, y)`; its
//! projections onto the two patches are the binodal curves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x4, Matrix4, SymmetricEigen, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::{fmt_num, Mesh};
use crate::jets::{Direction2, HeightFn};

/// A point `(u, v, x, y)` of the bitangency variety, `M`-side first.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactPair {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
}

impl ContactPair {
    pub const ORIGIN: ContactPair = ContactPair { u: 0.0, v: 0.0, x: 0.0, y: 0.0 };

    pub fn new(u: f64, v: f64, x: f64, y: f64) -> Self {
        Self { u, v, x, y }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.u, self.v, self.x, self.y)
    }

    pub fn from_vector(z: &Vector4<f64>) -> Self {
        Self::new(z[0], z[1], z[2], z[3])
    }

    pub fn point_m<F: HeightFn + ?Sized>(&self, f: &F) -> [f64; 3] {
        [self.u, self.v, f.value(self.u, self.v)]
    }

    pub fn point_n<G: HeightFn + ?Sized>(&self, g: &G) -> [f64; 3] {
        [self.x, 1.0 + self.y, g.value(self.x, self.y)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    M,
    N,
}

pub fn evaluate_h<F, G>(p: &ContactPair, f: &F, g: &G) -> Vector3<f64>
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    let [fu, fv] = f.gradient(p.u, p.v);
    let [gx, gy] = g.gradient(p.x, p.y);
    Vector3::new(
        fu - gx,
        fv - gy,
        (p.x - p.u) * fu + (1.0 + p.y - p.v) * fv + f.value(p.u, p.v) - g.value(p.x, p.y),
    )
}

pub fn jacobian_h<F, G>(p: &ContactPair, f: &F, g: &G) -> Matrix3x4<f64>
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    let [fu, fv] = f.gradient(p.u, p.v);
    let [gx, gy] = g.gradient(p.x, p.y);
    let [[fuu, fuv], [_, fvv]] = f.hessian(p.u, p.v);
    let [[gxx, gxy], [_, gyy]] = g.hessian(p.x, p.y);
    let du = p.x - p.u;
    let dv = 1.0 + p.y - p.v;
    Matrix3x4::new(
        fuu, fuv, -gxx, -gxy,
        fuv, fvv, -gxy, -gyy,
        du * fuu + dv * fuv, du * fuv + dv * fvv, fu - gx, fv - gy,
    )
}

/// Unnormalized kernel of a 3×4 matrix via signed 3×3 minors; zero iff the
/// rank is below 3.
pub fn kernel_vector(j: &Matrix3x4<f64>) -> Vector4<f64> {
    let minor = |skip: usize| {
        let cols: Vec<_> = (0..4).filter(|&c| c != skip).map(|c| j.column(c).into_owned()).collect();
        Matrix3::from_columns(&cols).determinant()
    };
    Vector4::new(minor(0), -minor(1), minor(2), -minor(3))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Jacobian is rank deficient (singular value ratio {ratio:e}, residual {residual:e})")]
    RankDeficient { ratio: f64, residual: f64 },
    #[error("iterate became non-finite")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonResult {
    pub pair: ContactPair,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimum-norm least-squares step `−Jᵀ(JJᵀ)⁻¹H`, or the singular value
/// ratio when `J` is numerically rank deficient.
fn min_norm_step(j: &Matrix3x4<f64>, h: &Vector3<f64>) -> Result<Vector4<f64>, f64> {
    // the step is invariant under row scaling; equilibrate before the rank test
    let mut j = *j;
    let mut h = *h;
    for r in 0..3 {
        let n = j.row(r).norm();
        if n > 0.0 {
            j.row_mut(r).scale_mut(1.0 / n);
            h[r] /= n;
        }
    }
    let svd = j.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= 1e-13) {
        return Err(ratio);
    }
    svd.solve(&h, 0.0).map(|x| -x).map_err(|_| ratio)
}

/// Damped minimum-norm Newton iteration onto the variety.
pub fn solve_newton<F, G>(seed: ContactPair, f: &F, g: &G, tol: f64, max_iter: usize) -> Result<NewtonResult, SolveError>
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    let mut z = seed.to_vector();
    let mut p = seed;
    let mut h = evaluate_h(&p, f, g);
    let mut res = h.norm();
    for it in 0..=max_iter {
        if !res.is_finite() {
            return Err(SolveError::NonFinite);
        }
        if res <= tol {
            return Ok(NewtonResult { pair: p, iterations: it, residual: res });
        }
        if it == max_iter {
            break;
        }
        let j = jacobian_h(&p, f, g);
        let dz = min_norm_step(&j, &h).map_err(|ratio| SolveError::RankDeficient { ratio, residual: res })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let zn = z + alpha * dz;
            let pn = ContactPair::from_vector(&zn);
            let hn = evaluate_h(&pn, f, g);
            let rn = hn.norm();
            if rn.is_finite() && rn < res {
                z = zn;
                p = pn;
                h = hn;
                res = rn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolveError::NonConvergence { iterations: it + 1, residual: res });
        }
    }
    Err(SolveError::NonConvergence { iterations: max_iter, residual: res })
}

/// Continuation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Nominal arclength step in `(u, v, x, y)`.
    pub step: f64,
    /// Step budget per direction.
    pub max_steps: usize,
    /// Tracing stops on leaving `|u|, |v|, |x|, |y| ≤ domain_bound`.
    pub domain_bound: f64,
    /// Points with `‖H‖` above this are never emitted.
    pub residual_tol: f64,
    /// Target residual of the corrector.
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_steps: 10_000,
            domain_bound: 0.5,
            residual_tol: 1e-9,
            corrector_tol: 1e-12,
            corrector_max_iter: 20,
        }
    }
}

/// An ordered polyline on the variety.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinodalCurve {
    pub points: Vec<ContactPair>,
    /// Cumulative arclength in `(u, v, x, y)` from the first point.
    pub arclength: Vec<f64>,
    /// `‖H‖` at each point.
    pub residual: Vec<f64>,
    /// Index of the start point of the trace (the origin).
    pub origin_index: usize,
    pub cusp_indices_m: Vec<usize>,
    pub cusp_indices_n: Vec<usize>,
    pub closed: bool,
    pub truncated: bool,
}

impl BinodalCurve {
    pub fn from_points<F, G>(points: Vec<ContactPair>, origin_index: usize, f: &F, g: &G, step: f64) -> Self
    where
        F: HeightFn + ?Sized,
        G: HeightFn + ?Sized,
    {
        let mut arclength = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (k, p) in points.iter().enumerate() {
            if k > 0 {
                s += (p.to_vector() - points[k - 1].to_vector()).norm();
            }
            arclength.push(s);
        }
        let residual = points.iter().map(|p| evaluate_h(p, f, g).norm()).collect();
        let mut c = BinodalCurve {
            points,
            arclength,
            residual,
            origin_index,
            cusp_indices_m: Vec::new(),
            cusp_indices_n: Vec::new(),
            closed: false,
            truncated: false,
        };
        c.cusp_indices_m = detect_cusps(&c, Side::M, step).iter().map(|k| k.index).collect();
        c.cusp_indices_n = detect_cusps(&c, Side::N, step).iter().map(|k| k.index).collect();
        c
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    /// Arclength measured from the origin point, negative before it.
    pub fn signed_arclength(&self, k: usize) -> f64 {
        self.arclength[k] - self.arclength.get(self.origin_index).copied().unwrap_or(0.0)
    }

    /// CSV with columns `index,s,u,v,x,y,res,cusp_M,cusp_N`; `s` is the
    /// signed arclength from the origin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        out.push_str(&self.csv_rows(0));
        out
    }

    fn csv_rows(&self, index_offset: usize) -> String {
        let mut out = String::new();
        for (k, p) in self.points.iter().enumerate() {
            let cm = u8::from(self.cusp_indices_m.contains(&k));
            let cn = u8::from(self.cusp_indices_n.contains(&k));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                k + index_offset,
                fmt_num(self.signed_arclength(k)),
                fmt_num(p.u),
                fmt_num(p.v),
                fmt_num(p.x),
                fmt_num(p.y),
                fmt_num(self.residual[k]),
                cm,
                cn
            ));
        }
        out
    }
}

pub const CURVE_CSV_HEADER: &str = "index,s,u,v,x,y,res,cusp_M,cusp_N";

/// CSV of several curves; curves after the first are preceded by a
/// `# branch k` comment line.
pub fn curves_to_csv(curves: &[BinodalCurve], isolated: bool) -> String {
    let mut out = String::new();
    if isolated {
        out.push_str("# isolated\n");
    }
    out.push_str(CURVE_CSV_HEADER);
    out.push('\n');
    for (b, c) in curves.iter().enumerate() {
        if curves.len() > 1 {
            out.push_str(&format!("# branch {b}\n"));
        }
        out.push_str(&c.csv_rows(0));
    }
    out
}

/// Result of [`trace_binodal`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOutcome {
    pub curves: Vec<BinodalCurve>,
    /// The origin is a singular point of the variety with no real branch.
    pub isolated: bool,
    /// Rank of the Jacobian at the origin.
    pub origin_rank: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("start point is not on the variety (residual {0:e})")]
    NotOnVariety(f64),
    #[error("Jacobian at the start point has rank {0}; at least 2 is required")]
    DegenerateStart(usize),
    #[error("invalid trace options: {0}")]
    Options(String),
}

struct HalfTrace {
    points: Vec<Vector4<f64>>,
    closed: bool,
    truncated: bool,
}

fn in_box(z: &Vector4<f64>, bound: f64) -> bool {
    z.iter().all(|c| c.abs() <= bound)
}

fn point_segment_distance(p: &Vector4<f64>, a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (a + t * d - p).norm()
}

struct Tracer<'a, F: ?Sized, G: ?Sized> {
    f: &'a F,
    g: &'a G,
    opts: TraceOptions,
}

impl<F: HeightFn + ?Sized, G: HeightFn + ?Sized> Tracer<'_, F, G> {
    fn h(&self, z: &Vector4<f64>) -> Vector3<f64> {
        evaluate_h(&ContactPair::from_vector(z), self.f, self.g)
    }

    fn jac(&self, z: &Vector4<f64>) -> Matrix3x4<f64> {
        jacobian_h(&ContactPair::from_vector(z), self.f, self.g)
    }

    fn unit_tangent(&self, z: &Vector4<f64>) -> Option<Vector4<f64>> {
        let j = self.jac(z);
        let k = kernel_vector(&j);
        let n = k.norm();
        let scale = j.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        (n > 1e-14 * scale.powi(3) && n.is_finite()).then(|| k / n)
    }

    /// Newton on `[H = 0; t·(z − pred) = 0]`.
    fn correct(&self, pred: &Vector4<f64>, t: &Vector4<f64>) -> Option<Vector4<f64>> {
        let mut z = *pred;
        for _ in 0..self.opts.corrector_max_iter {
            let h = self.h(&z);
            let r = h.norm();
            if !r.is_finite() {
                return None;
            }
            if r <= self.opts.corrector_tol {
                return Some(z);
            }
            let j = self.jac(&z);
            let mut a = Matrix4::zeros();
            a.fixed_view_mut::<3, 4>(0, 0).copy_from(&j);
            a.set_row(3, &t.transpose());
            let rhs = Vector4::new(-h[0], -h[1], -h[2], -t.dot(&(z - pred)));
            let dz = a.lu().solve(&rhs)?;
            z += dz;
            if dz.norm() <= 1e-15 * (1.0 + z.norm()) {
                let r = self.h(&z).norm();
                return (r <= self.opts.residual_tol).then_some(z);
            }
        }
        let r = self.h(&z).norm();
        (r <= self.opts.residual_tol).then_some(z)
    }

    /// Follows the curve from `start` along `t0`. The returned points
    /// exclude `start`.
    fn half(&self, start: Vector4<f64>, t0: Vector4<f64>, initial_step: f64, origin: &Vector4<f64>) -> HalfTrace {
        let step = self.opts.step;
        let min_step = step * 2f64.powi(-14);
        let mut z = start;
        let mut t = t0;
        let mut h = initial_step.min(step);
        let mut out = HalfTrace { points: Vec::new(), closed: false, truncated: false };
        while out.points.len() < self.opts.max_steps {
            let pred = z + h * t;
            let accepted = self.correct(&pred, &t).and_then(|zn| {
                if (zn - pred).norm() > 0.1 * h {
                    return None;
                }
                let mut tn = self.unit_tangent(&zn)?;
                if tn.dot(&t) < 0.0 {
                    tn = -tn;
                }
                (tn.dot(&t) > 0.9).then_some((zn, tn))
            });
            match accepted {
                Some((zn, tn)) => {
                    if !in_box(&zn, self.opts.domain_bound) {
                        break;
                    }
                    if out.points.len() > 8 && point_segment_distance(origin, &z, &zn) < 0.5 * h {
                        out.closed = true;
                        break;
                    }
                    out.points.push(zn);
                    z = zn;
                    t = tn;
                    h = (2.0 * h).min(step);
                }
                None => {
                    h *= 0.5;
                    if h < min_step {
                        out.truncated = true;
                        break;
                    }
                }
            }
        }
        out
    }
}

/// Traces the variety through the origin in both directions.
///
/// At a regular origin this yields one curve. At an origin where the
/// Jacobian has rank 2, real branches are located on a circle of radius
/// `step` in the kernel plane; no branch means the origin is an isolated
/// point of the real variety.
pub fn trace_binodal<F, G>(f: &F, g: &G, opts: &TraceOptions) -> Result<TraceOutcome, TraceError>
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    trace_from(ContactPair::ORIGIN, f, g, opts)
}

/// As [`trace_binodal`], starting from an arbitrary point of the variety.
/// The domain box is centred at zero regardless of `start`.
pub fn trace_from<F, G>(start: ContactPair, f: &F, g: &G, opts: &TraceOptions) -> Result<TraceOutcome, TraceError>
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    if !(opts.step > 0.0 && opts.domain_bound > 0.0 && opts.residual_tol > 0.0 && opts.step.is_finite()) {
        return Err(TraceError::Options("step, domain_bound and residual_tol must be positive".into()));
    }
    let tracer = Tracer { f, g, opts: *opts };
    let z0 = start.to_vector();
    let r0 = tracer.h(&z0).norm();
    if r0 > opts.residual_tol {
        return Err(TraceError::NotOnVariety(r0));
    }
    let j0 = tracer.jac(&z0);
    let rank = numeric_rank(&j0);
    let mut warnings = Vec::new();
    let mk = |pts: Vec<Vector4<f64>>, origin_index: usize, closed: bool, truncated: bool| {
        let pts: Vec<ContactPair> = pts.iter().map(ContactPair::from_vector).collect();
        let mut c = BinodalCurve::from_points(pts, origin_index, f, g, opts.step);
        c.closed = closed;
        c.truncated = truncated;
        c
    };

    if rank == 3 {
        let t0 = tracer.unit_tangent(&z0).ok_or(TraceError::DegenerateStart(rank))?;
        let fwd = tracer.half(z0, t0, opts.step, &z0);
        if fwd.closed {
            let mut pts = vec![z0];
            pts.extend(fwd.points);
            return Ok(TraceOutcome { curves: vec![mk(pts, 0, true, fwd.truncated)], isolated: false, origin_rank: 3, warnings });
        }
        let bwd = tracer.half(z0, -t0, opts.step, &z0);
        let truncated = fwd.truncated || bwd.truncated;
        if truncated {
            warnings.push("corrector failed; curve truncated".into());
        }
        let origin_index = bwd.points.len();
        let mut pts: Vec<Vector4<f64>> = bwd.points.into_iter().rev().collect();
        pts.push(z0);
        pts.extend(fwd.points);
        return Ok(TraceOutcome { curves: vec![mk(pts, origin_index, false, truncated)], isolated: false, origin_rank: 3, warnings });
    }
    if rank < 2 {
        return Err(TraceError::DegenerateStart(rank));
    }

    let rays = singular_rays(&tracer, &z0);
    if rays.is_empty() {
        return Ok(TraceOutcome { curves: Vec::new(), isolated: true, origin_rank: rank, warnings });
    }
    let mut halves: Vec<HalfBranch> = Vec::new();
    for (p, dir) in rays {
        let t = match tracer.unit_tangent(&p) {
            Some(t) if t.dot(&dir) < 0.0 => -t,
            Some(t) => t,
            None => dir,
        };
        let tr = tracer.half(p, t, opts.step / 16.0, &z0);
        if tr.truncated {
            warnings.push("corrector failed on a branch; curve truncated".into());
        }
        let mut pts = vec![z0, p];
        pts.extend(tr.points);
        halves.push(HalfBranch::new(pts, tr.truncated));
    }
    let pairs = pair_half_branches(&halves);
    let mut used = vec![false; halves.len()];
    let mut curves = Vec::new();
    for (a, b) in pairs {
        used[a] = true;
        used[b] = true;
        let ha = &halves[a];
        let hb = &halves[b];
        let mut pts: Vec<Vector4<f64>> = ha.points.iter().rev().copied().collect();
        let origin_index = pts.len() - 1;
        pts.extend(hb.points.iter().skip(1).copied());
        curves.push(mk(pts, origin_index, false, ha.truncated || hb.truncated));
    }
    for (k, hb) in halves.iter().enumerate() {
        if !used[k] {
            warnings.push("unpaired half-branch at singular origin".into());
            curves.push(mk(hb.points.clone(), 0, false, hb.truncated));
        }
    }
    Ok(TraceOutcome { curves, isolated: false, origin_rank: rank, warnings })
}

/// Rank of the 3×4 Jacobian with a relative singular-value cutoff.
pub fn numeric_rank(j: &Matrix3x4<f64>) -> usize {
    let sv = j.transpose().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// Geometry of a rank-2 Jacobian at the origin.
struct SingularFrame {
    kernel: [Vector4<f64>; 2],
    rows: [Vector4<f64>; 2],
    range: [Vector3<f64>; 2],
    left_null: Vector3<f64>,
}

fn singular_frame(j: &Matrix3x4<f64>) -> SingularFrame {
    let e4 = SymmetricEigen::new(j.transpose() * j);
    let mut idx4: Vec<usize> = (0..4).collect();
    idx4.sort_by(|&a, &b| e4.eigenvalues[a].total_cmp(&e4.eigenvalues[b]));
    let col4 = |k: usize| -> Vector4<f64> { e4.eigenvectors.column(idx4[k]).into_owned() };
    let e3 = SymmetricEigen::new(j * j.transpose());
    let mut idx3: Vec<usize> = (0..3).collect();
    idx3.sort_by(|&a, &b| e3.eigenvalues[a].total_cmp(&e3.eigenvalues[b]));
    let col3 = |k: usize| -> Vector3<f64> { e3.eigenvectors.column(idx3[k]).into_owned() };
    SingularFrame { kernel: [col4(0), col4(1)], rows: [col4(2), col4(3)], range: [col3(1), col3(2)], left_null: col3(0) }
}

/// Point on the probe circle at angle `theta` with the range equations
/// solved; returns the point and the reduced residual `l·H`.
fn probe<F: HeightFn + ?Sized, G: HeightFn + ?Sized>(
    tr: &Tracer<'_, F, G>,
    fr: &SingularFrame,
    origin: &Vector4<f64>,
    rho: f64,
    theta: f64,
) -> Option<(Vector4<f64>, f64)> {
    let base = origin + rho * (theta.cos() * fr.kernel[0] + theta.sin() * fr.kernel[1]);
    let mut ab = Vector2::zeros();
    let at = |ab: &Vector2<f64>| base + ab[0] * fr.rows[0] + ab[1] * fr.rows[1];
    for _ in 0..40 {
        let z = at(&ab);
        let h = tr.h(&z);
        let r = Vector2::new(fr.range[0].dot(&h), fr.range[1].dot(&h));
        let j = tr.jac(&z);
        let m = Matrix2::from_fn(|i, k| fr.range[i].dot(&(j * fr.rows[k])));
        let d = m.lu().solve(&(-r))?;
        ab += d;
        if !ab.iter().all(|c| c.is_finite()) || ab.norm() > rho {
            return None;
        }
        if d.norm() <= 1e-17 * (rho * rho).max(ab.norm()) + f64::MIN_POSITIVE {
            break;
        }
    }
    let z = at(&ab);
    let phi = fr.left_null.dot(&tr.h(&z));
    phi.is_finite().then_some((z, phi))
}

fn golden_min(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn bisect(mut a: f64, mut b: f64, fa: f64, f: impl Fn(f64) -> f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Angular roots of the reduced residual on the probe circle, returned as
/// polished points with outward directions.
fn singular_rays<F: HeightFn + ?Sized, G: HeightFn + ?Sized>(
    tr: &Tracer<'_, F, G>,
    origin: &Vector4<f64>,
) -> Vec<(Vector4<f64>, Vector4<f64>)> {
    const SAMPLES: usize = 64;
    let fr = singular_frame(&tr.jac(origin));
    let rho = tr.opts.step;
    let phi = |th: f64| probe(tr, &fr, origin, rho, th).map_or(f64::NAN, |p| p.1);
    let thetas: Vec<f64> = (0..SAMPLES).map(|k| 2.0 * PI * k as f64 / SAMPLES as f64).collect();
    let vals: Vec<f64> = thetas.iter().map(|&t| phi(t)).collect();
    let dth = 2.0 * PI / SAMPLES as f64;
    let mut roots: Vec<f64> = Vec::new();
    for k in 0..SAMPLES {
        let (t0, t1) = (thetas[k], thetas[k] + dth);
        let (v0, v1) = (vals[k], vals[(k + 1) % SAMPLES]);
        if !(v0.is_finite() && v1.is_finite()) {
            continue;
        }
        if v0 == 0.0 {
            roots.push(t0);
        } else if v0.signum() != v1.signum() && v1 != 0.0 {
            roots.push(bisect(t0, t1, v0, phi));
        }
    }
    // pairs of nearby roots hide between samples as a shallow extremum
    for k in 0..SAMPLES {
        let (vp, v, vn) = (vals[(k + SAMPLES - 1) % SAMPLES], vals[k], vals[(k + 1) % SAMPLES]);
        if !(vp.is_finite() && v.is_finite() && vn.is_finite()) || v == 0.0 {
            continue;
        }
        let s = v.signum();
        if vp.signum() != s || vn.signum() != s || !(s * v <= s * vp && s * v <= s * vn) {
            continue;
        }
        let (a, b) = (thetas[k] - dth, thetas[k] + dth);
        let (tm, fm) = golden_min(a, b, 1e-13, |t| s * phi(t));
        if fm.is_finite() && fm < 0.0 {
            let left = bisect(a, tm, s * vp, |t| s * phi(t));
            let right = bisect(tm, b, fm, |t| s * phi(t));
            roots.push(left.rem_euclid(2.0 * PI));
            roots.push(right.rem_euclid(2.0 * PI));
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut rays = Vec::new();
    for th in roots {
        let Some((z, _)) = probe(tr, &fr, origin, rho, th) else { continue };
        let p = ContactPair::from_vector(&z);
        let polished = match solve_newton(p, tr.f, tr.g, 0.1 * tr.opts.corrector_tol.max(1e-300), 20) {
            Ok(r) => r.pair.to_vector(),
            Err(_) if tr.h(&z).norm() <= tr.opts.residual_tol => z,
            Err(_) => continue,
        };
        let dir = (polished - origin).normalize();
        rays.push((polished, dir));
    }
    rays
}

struct HalfBranch {
    points: Vec<Vector4<f64>>,
    truncated: bool,
    tangent: Vector4<f64>,
    curvature: Vector4<f64>,
}

impl HalfBranch {
    /// Fits `z(s) = t s + k s²/2 + j s³/6` from the origin outward.
    fn new(points: Vec<Vector4<f64>>, truncated: bool) -> Self {
        let origin = points[0];
        let m = points.len().min(48);
        let mut s = vec![0.0; m];
        for k in 1..m {
            s[k] = s[k - 1] + (points[k] - points[k - 1]).norm();
        }
        let smax = s[m - 1].max(f64::MIN_POSITIVE);
        let deg = 3.min(m - 1).max(1);
        let a = DMatrix::from_fn(m - 1, deg, |r, c| (s[r + 1] / smax).powi(c as i32 + 1));
        let mut tangent = Vector4::zeros();
        let mut curvature = Vector4::zeros();
        let svd = a.svd(true, true);
        for d in 0..4 {
            let b = DVector::from_fn(m - 1, |r, _| points[r + 1][d] - origin[d]);
            if let Ok(c) = svd.solve(&b, 1e-14) {
                tangent[d] = c[0] / smax;
                if deg >= 2 {
                    curvature[d] = 2.0 * c[1] / (smax * smax);
                }
            }
        }
        Self { points, truncated, tangent, curvature }
    }
}

/// Pairs outward half-branches into curves through the origin: a smooth
/// curve's halves have opposite tangents and equal curvature vectors.
fn pair_half_branches(halves: &[HalfBranch]) -> Vec<(usize, usize)> {
    let cost = |a: &HalfBranch, b: &HalfBranch| {
        let tn = a.tangent.norm().max(b.tangent.norm()).max(f64::MIN_POSITIVE);
        (a.tangent / tn + b.tangent / tn).norm() + (a.curvature - b.curvature).norm() / (1.0 + a.curvature.norm() + b.curvature.norm())
    };
    let n = halves.len();
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    fn matchings(rest: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if rest.len() < 2 {
            return vec![Vec::new()];
        }
        let a = rest[0];
        let mut out = Vec::new();
        for k in 1..rest.len() {
            let b = rest[k];
            let others: Vec<usize> = rest.iter().copied().filter(|&x| x != a && x != b).collect();
            for mut m in matchings(&others) {
                m.push((a, b));
                out.push(m);
            }
        }
        out
    }
    if n > 8 {
        return (0..n / 2).map(|k| (2 * k, 2 * k + 1)).collect();
    }
    let idx: Vec<usize> = (0..n).collect();
    for m in matchings(&idx) {
        let c: f64 = m.iter().map(|&(a, b)| cost(&halves[a], &halves[b])).sum();
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, m));
        }
    }
    let mut pairs = best.map(|b| b.1).unwrap_or_default();
    pairs.sort();
    pairs
}

/// Polyline of the curve on one patch's parameter plane.
pub fn project(curve: &BinodalCurve, side: Side) -> Vec<[f64; 2]> {
    curve
        .points
        .iter()
        .map(|p| match side {
            Side::M => [p.u, p.v],
            Side::N => [p.x, p.y],
        })
        .collect()
}

/// A detected cusp of a projected polyline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspPoint {
    pub index: usize,
    pub point: [f64; 2],
    pub tangent: Direction2,
}

pub fn detect_cusps(curve: &BinodalCurve, side: Side, step: f64) -> Vec<CuspPoint> {
    detect_cusps_polyline(&project(curve, side), &curve.arclength, step)
}

/// Cusps of a sampled plane curve `p(s)`.
///
/// A sample is a cusp when the central-difference speed is a local minimum
/// below `step · 10⁻²` and the chords two samples back and forward point in
/// opposing directions. The limiting tangent is the direction of `p''` at
/// the speed minimum of a local quartic fit.
pub fn detect_cusps_polyline(points: &[[f64; 2]], params: &[f64], step: f64) -> Vec<CuspPoint> {
    const W: usize = 2;
    let n = points.len();
    if n < 5 || params.len() != n {
        return Vec::new();
    }
    let speed = |i: usize| {
        let dx = points[i + 1][0] - points[i - 1][0];
        let dy = points[i + 1][1] - points[i - 1][1];
        0.5 * dx.hypot(dy)
    };
    let c: Vec<f64> = (0..n).map(|i| if i == 0 || i + 1 == n { f64::INFINITY } else { speed(i) }).collect();
    let mut out = Vec::new();
    for i in W..n - W {
        if !(c[i] < step * 1e-2 && c[i] <= c[i - 1] && c[i] <= c[i + 1]) {
            continue;
        }
        let b = [points[i][0] - points[i - W][0], points[i][1] - points[i - W][1]];
        let f = [points[i + W][0] - points[i][0], points[i + W][1] - points[i][1]];
        if b[0] * f[0] + b[1] * f[1] >= 0.0 {
            continue;
        }
        if out.last().is_some_and(|p: &CuspPoint| i - p.index <= W) {
            continue;
        }
        let tangent = limiting_tangent(points, params, i).unwrap_or_else(|| {
            Direction2::new(b[0] - f[0], b[1] - f[1]).or_else(|| Direction2::new(1.0, 0.0)).unwrap()
        });
        out.push(CuspPoint { index: i, point: points[i], tangent });
    }
    out
}

fn limiting_tangent(points: &[[f64; 2]], params: &[f64], i: usize) -> Option<Direction2> {
    const HALF: usize = 20;
    const DEG: usize = 4;
    let lo = i.saturating_sub(HALF);
    let hi = (i + HALF).min(points.len() - 1);
    let m = hi - lo + 1;
    if m < DEG + 2 {
        return None;
    }
    let s0 = params[i];
    let scale = params[lo..=hi].iter().map(|s| (s - s0).abs()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let a = DMatrix::from_fn(m, DEG + 1, |r, c| ((params[lo + r] - s0) / scale).powi(c as i32));
    let svd = a.svd(true, true);
    let mut coef = [[0.0; DEG + 1]; 2];
    for (d, cd) in coef.iter_mut().enumerate() {
        let b = DVector::from_fn(m, |r, _| points[lo + r][d]);
        let c = svd.solve(&b, 1e-14).ok()?;
        cd.copy_from_slice(c.as_slice());
    }
    let deriv = |cd: &[f64; DEG + 1], s: f64, order: usize| -> f64 {
        (order..=DEG)
            .map(|k| {
                let fall: f64 = (0..order).map(|q| (k - q) as f64).product();
                cd[k] * fall * s.powi((k - order) as i32)
            })
            .sum()
    };
    let speed2 = |s: f64| deriv(&coef[0], s, 1).powi(2) + deriv(&coef[1], s, 1).powi(2);
    let (smin, _) = golden_min(-0.5, 0.5, 1e-12, speed2);
    Direction2::new(deriv(&coef[0], smin, 2), deriv(&coef[1], smin, 2))
}

/// Ruled surface of the tie lines of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct TieLineMesh {
    pub mesh: Mesh,
    pub extension: f64,
}

impl TieLineMesh {
    pub fn to_obj(&self) -> String {
        self.mesh.to_obj()
    }

    /// Endpoints of rule `k` before extension: the two contact points lie on
    /// the segment between vertices `2k` and `2k + 1`.
    pub fn rule(&self, k: usize) -> ([f64; 3], [f64; 3]) {
        (self.mesh.vertices[2 * k], self.mesh.vertices[2 * k + 1])
    }
}

/// Joins `(u, v, f)` to `(x, 1 + y, g)` for every contact pair, extended by
/// `extension` past both ends, with quads between consecutive rules.
pub fn tie_line_mesh<F, G>(curve: &BinodalCurve, f: &F, g: &G, extension: f64) -> TieLineMesh
where
    F: HeightFn + ?Sized,
    G: HeightFn + ?Sized,
{
    let mut mesh = Mesh::default();
    for p in &curve.points {
        let a = p.point_m(f);
        let b = p.point_n(g);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let e = if len > 0.0 { extension / len } else { 0.0 };
        mesh.vertices.push([a[0] - e * d[0], a[1] - e * d[1], a[2] - e * d[2]]);
        mesh.vertices.push([b[0] + e * d[0], b[1] + e * d[1], b[2] + e * d[2]]);
    }
    let n = curve.points.len();
    for k in 1..n {
        let (a0, a1, b0, b1) = (2 * (k - 1), 2 * (k - 1) + 1, 2 * k, 2 * k + 1);
        mesh.faces.push(vec![a0, a1, b1, b0]);
    }
    if curve.closed && n > 2 {
        mesh.faces.push(vec![2 * (n - 1), 2 * (n - 1) + 1, 1, 0]);
    }
    TieLineMesh { mesh, extension }
}

/// Tangent plane `z = c₀ + c₁ X + c₂ Y` of a graph at a point, from its
/// gradient; used to check coincidence independently of `H`.
pub fn tangent_plane<F: HeightFn + ?Sized>(f: &F, u: f64, v: f64, y_offset: f64) -> [f64; 3] {
    let [fu, fv] = f.gradient(u, v);
    let z = f.value(u, v);
    [z - fu * u - fv * (v + y_offset), fu, fv]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::SurfaceJet;

    fn jet(terms: &[((usize, usize), f64)]) -> SurfaceJet {
        SurfaceJet::from_terms(terms.iter().copied()).unwrap()
    }

    fn paraboloid() -> SurfaceJet {
        jet(&[((2, 0), 1.0), ((0, 2), 1.0)])
    }

    #[test]
    fn h_examples() {
        let f = paraboloid();
        assert_eq!(evaluate_h(&ContactPair::ORIGIN, &f, &f), Vector3::zeros());
        let h = evaluate_h(&ContactPair::new(0.1, 0.0, 0.1, 0.0), &f, &f);
        assert!(h.norm() < 1e-16);
        let h = evaluate_h(&ContactPair::new(0.1, 0.0, 0.2, 0.0), &f, &f);
        assert!((h - Vector3::new(-0.2, 0.0, -0.01)).norm() < 1e-15);
    }

    #[test]
    fn jacobian_at_origin() {
        let f = paraboloid();
        let j = jacobian_h(&ContactPair::ORIGIN, &f, &f);
        let expect = Matrix3x4::new(2.0, 0.0, -2.0, 0.0, 0.0, 2.0, 0.0, -2.0, 0.0, 2.0, 0.0, 0.0);
        assert_eq!(j, expect);
        assert_eq!(numeric_rank(&j), 3);
        let k = kernel_vector(&j);
        assert!((j * k).norm() < 1e-14 && k.norm() > 0.0);
    }

    #[test]
    fn newton_examples() {
        let f = paraboloid();
        let g = jet(&[((2, 0), 1.0), ((0, 2), 1.0), ((3, 0), 1.0)]);
        let r = solve_newton(ContactPair::ORIGIN, &f, &g, 1e-12, 50).unwrap();
        assert_eq!(r.iterations, 0);
        let r = solve_newton(ContactPair::new(0.1, 0.0, 0.1, 0.0), &f, &g, 1e-12, 50).unwrap();
        assert!(r.residual < 1e-12);
        let q = jet(&[((2, 0), 1.0), ((0, 2), 1.0), ((4, 0), 1.0)]);
        let far = ContactPair::new(1e6, 1e6, -1e6, 1e6);
        let r = solve_newton(far, &f, &q, 1e-12, 5);
        assert!(matches!(r, Err(SolveError::NonConvergence { .. })), "{r:?}");
    }

    #[test]
    fn regular_trace_case_one() {
        let f = paraboloid();
        let out = trace_binodal(&f, &f, &TraceOptions { domain_bound: 0.2, ..Default::default() }).unwrap();
        assert_eq!(out.curves.len(), 1);
        let c = &out.curves[0];
        assert!(c.len() > 100);
        assert!(c.max_residual() <= 1e-9);
        assert!(c.cusp_indices_m.is_empty() && c.cusp_indices_n.is_empty());
        for w in c.points.windows(2) {
            assert!((w[1].to_vector() - w[0].to_vector()).norm() <= 1.01e-3);
        }
        // identical paraboloids: bitangent planes are translations along the tie line
        for p in &c.points {
            assert!((p.u - p.x).abs() < 1e-9 && (p.v - p.y).abs() < 1e-9);
        }
    }

    #[test]
    fn model_cusp_detected() {
        let ts: Vec<f64> = (-50..=50).map(|k| k as f64 * 1e-3).collect();
        let pts: Vec<[f64; 2]> = ts.iter().map(|t| [t * t, t * t * t]).collect();
        let cusps = detect_cusps_polyline(&pts, &ts, 1e-3);
        assert_eq!(cusps.len(), 1);
        assert_eq!(cusps[0].index, 50);
        assert!(cusps[0].tangent.is_parallel(&Direction2::new(1.0, 0.0).unwrap(), 1e-6));
        let line: Vec<[f64; 2]> = ts.iter().map(|t| [*t, 2.0 * t]).collect();
        assert!(detect_cusps_polyline(&line, &ts, 1e-3).is_empty());
    }

    #[test]
    fn tie_line_mesh_base() {
        let f = paraboloid();
        let c = BinodalCurve::from_points(vec![ContactPair::ORIGIN], 0, &f, &f, 1e-3);
        let m = tie_line_mesh(&c, &f, &f, 0.0);
        assert_eq!(m.rule(0), ([0.0, 0.0, 0.0], [0.0, 1.0, 0.0]));
        assert!(m.mesh.faces.is_empty());
    }
}
