//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use bitangent_core::bitangent::{detect_cusps, evaluate_h, jacobian_h, numeric_rank, tangent_plane, trace_binodal, Side};
use bitangent_core::classifier::{beaks_criterion, c3, classify, cusp_invariant};
use bitangent_core::normal_forms::{
    binodal_from_normal_form, criminant_closed_form_c3, criminant_numeric, sweep_family, Grid1, NormalFormSpec,
};
use bitangent_core::thermo::{
    critical_point, equal_area_bisection, find_seed, helmholtz_single, maxwell_construction, mixture_binodal,
    mixture_helmholtz, spinodal_single, FluidParams, MixtureParams,
};
use bitangent_core::{BinodalCurve, CaseLabel, ContactPair, Direction2, SurfaceJet, Tolerance, TraceOptions};
use common::{hand_pairs, jet, nearest_on_interpolant, random_jet, rng, tie_preserving_map};
use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3, Vector4};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn opts(domain: f64) -> TraceOptions {
    TraceOptions { domain_bound: domain, ..Default::default() }
}

fn regular_pair(r: &mut impl Rng) -> (SurfaceJet, SurfaceJet) {
    loop {
        let (f, g) = (random_jet(r), random_jet(r));
        if numeric_rank(&jacobian_h(&ContactPair::ORIGIN, &f, &g)) == 3 && f.coeff(1, 1).hypot(2.0 * f.coeff(0, 2)) > 0.2 {
            return (f, g);
        }
    }
}

/// Least-squares polynomial in `t / scale` with the given exponents,
/// returning coefficients in the unscaled variable.
fn poly_fit(ts: &[f64], ys: &[f64], powers: &[i32], scale: f64) -> Vec<f64> {
    let a = DMatrix::from_fn(ts.len(), powers.len(), |i, j| (ts[i] / scale).powi(powers[j]));
    let sol = a.svd(true, true).solve(&DVector::from_column_slice(ys), 1e-15).expect("svd solve");
    powers.iter().zip(sol.iter()).map(|(&p, c)| c / scale.powi(p)).collect()
}

fn plane_mismatch(f: &SurfaceJet, g: &SurfaceJet, p: &ContactPair) -> f64 {
    let a = tangent_plane(f, p.u, p.v, 0.0);
    let b = tangent_plane(g, p.x, p.y, 1.0);
    let na = Vector3::new(a[1], a[2], -1.0).normalize();
    let nb = Vector3::new(b[1], b[2], -1.0).normalize();
    na.cross(&nb).norm().max((a[0] - b[0]).abs())
}

fn criterion_1() -> Check {
    let mut r = rng(1);
    let mut cases: Vec<(String, SurfaceJet, SurfaceJet)> = (0..6)
        .map(|k| {
            let (f, g) = regular_pair(&mut r);
            (format!("random #{k}"), f, g)
        })
        .collect();
    for (label, f, g) in hand_pairs() {
        cases.push((label.to_string(), f, g));
    }
    let (mut points, mut worst_h, mut worst_plane, mut slowest) = (0usize, 0.0f64, 0.0f64, Duration::ZERO);
    for (name, f, g) in &cases {
        let t0 = Instant::now();
        let out = trace_binodal(f, g, &opts(0.5)).map_err(|e| format!("{name}: {e}"))?;
        let dt = t0.elapsed();
        slowest = slowest.max(dt);
        ensure(dt < Duration::from_secs(5), || format!("{name}: trace took {dt:?}"))?;
        for c in &out.curves {
            for p in &c.points {
                worst_h = worst_h.max(evaluate_h(p, f, g).norm());
                worst_plane = worst_plane.max(plane_mismatch(f, g, p));
                points += 1;
            }
        }
    }
    ensure(worst_h <= 1e-9, || format!("max |H| = {worst_h:e}"))?;
    ensure(worst_plane <= 1e-8, || format!("tangent-plane mismatch {worst_plane:e}"))?;
    Ok(format!(
        "{} traces, {points} points, max |H| = {worst_h:.1e}, plane mismatch {worst_plane:.1e}, slowest {slowest:.2?}",
        cases.len()
    ))
}

fn prop41_pair(r: &mut impl Rng) -> (SurfaceJet, SurfaceJet) {
    loop {
        let mut ft = vec![((2, 0), r.gen_range(-1.0..1.0)), ((1, 1), r.gen_range(-1.0..1.0)), ((0, 2), r.gen_range(-1.0..1.0))];
        let (a, b) = (r.gen_range(-1.0..1.0), r.gen_range(0.5..1.5) * if r.gen_bool(0.5) { 1.0 } else { -1.0 });
        let s = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut gt = vec![((2, 0), s * a * a), ((1, 1), 2.0 * s * a * b), ((0, 2), s * b * b)];
        for d in 3..=4 {
            for i in 0..=d {
                ft.push(((i, d - i), r.gen_range(-1.0..1.0)));
                gt.push(((i, d - i), r.gen_range(-1.0..1.0)));
            }
        }
        let (f, g) = (jet(&ft), jet(&gt));
        let ok = f.discriminant().abs() >= 0.3
            && g.cubic_invariant().abs() >= 0.3
            && cusp_invariant(&f, &g, tol()).is_ok_and(|v| v.abs() > 1e-3);
        if ok {
            return (f, g);
        }
    }
}

fn criterion_2() -> Check {
    let mut r = rng(2);
    let step = 1e-3;
    let (mut worst_angle, mut worst_rel) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let (f, g) = prop41_pair(&mut r);
        let out = trace_binodal(&f, &g, &opts(0.05)).map_err(|e| format!("pair {k}: {e}"))?;
        ensure(out.curves.len() == 1, || format!("pair {k}: {} curves", out.curves.len()))?;
        let c = &out.curves[0];
        let near: Vec<_> = detect_cusps(c, Side::M, step)
            .into_iter()
            .filter(|q| q.point[0].hypot(q.point[1]) < 0.02)
            .collect();
        ensure(near.len() == 1, || format!("pair {k}: {} M-cusps near the origin", near.len()))?;
        let cusp = &near[0];
        ensure(cusp.point[0].hypot(cusp.point[1]) <= 2.0 * step, || format!("pair {k}: cusp at {:?}", cusp.point))?;
        let expected = Direction2::new(-2.0 * f.coeff(0, 2), f.coeff(1, 1)).unwrap();
        let angle = cusp.tangent.sin_angle(&expected).abs().asin();
        worst_angle = worst_angle.max(angle);
        ensure(angle < 1e-3, || format!("pair {k}: tangent off by {angle:e} rad"))?;

        // u(x), v(x) along the curve, with x the contact coordinate on N
        let pts: Vec<&ContactPair> = c.points.iter().filter(|p| p.x.abs() < 0.02).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let powers = [1, 2, 3, 4, 5, 6];
        let fu = poly_fit(&xs, &pts.iter().map(|p| p.u).collect::<Vec<_>>(), &powers, 0.02);
        let fv = poly_fit(&xs, &pts.iter().map(|p| p.v).collect::<Vec<_>>(), &powers, 0.02);
        let fitted = fu[1] * fv[2] - fu[2] * fv[1];
        let formula = cusp_invariant(&f, &g, tol()).unwrap();
        ensure(formula != 0.0 && fitted.signum() == formula.signum(), || {
            format!("pair {k}: ps-qr formula {formula:e}, fitted {fitted:e}")
        })?;
        worst_rel = worst_rel.max(((fitted - formula) / formula).abs());
    }
    Ok(format!(
        "20/20 pairs: one M-cusp at the origin, max tangent angle {worst_angle:.1e} rad, ps-qr sign matches (max relative gap to fit {worst_rel:.1e})"
    ))
}

fn asymptotic_cubic(f: &SurfaceJet) -> f64 {
    let a = f.coeff(1, 1) / (2.0 * f.coeff(0, 2));
    f.coeff(3, 0) - f.coeff(2, 1) * a + f.coeff(1, 2) * a * a - f.coeff(0, 3) * a * a * a
}

fn case3a_pair(r: &mut impl Rng) -> (SurfaceJet, SurfaceJet) {
    loop {
        let mk = |r: &mut dyn rand::RngCore, a: f64| {
            let s = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut t = vec![((2, 0), s * a * a), ((1, 1), 2.0 * s * a), ((0, 2), s)];
            for d in 3..=4 {
                for i in 0..=d {
                    t.push(((i, d - i), r.gen_range(-1.0..1.0)));
                }
            }
            jet(&t)
        };
        let (af, ag): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        if (af - ag).abs() < 0.3 {
            continue;
        }
        let (f, g) = (mk(r, af), mk(r, ag));
        if asymptotic_cubic(&f).abs() >= 0.3 && asymptotic_cubic(&g).abs() >= 0.3 {
            return (f, g);
        }
    }
}

/// Projection of a branch onto one surface (`M` for `first`, else `N`).
fn projected(c: &BinodalCurve, first: bool, rho: f64) -> Vec<Vector2<f64>> {
    c.points
        .iter()
        .map(|p| if first { Vector2::new(p.u, p.v) } else { Vector2::new(p.x, p.y) })
        .filter(|q| q.norm() < rho)
        .collect()
}

/// Taylor coefficients `[a₁, a₂, a₃]` of a plane branch written as a graph
/// over the line through the origin with unit direction `t`.
fn graph_jet(pts: &[Vector2<f64>], t: &Vector2<f64>, rho: f64) -> [f64; 3] {
    let n = Vector2::new(-t[1], t[0]);
    let ts: Vec<f64> = pts.iter().map(|q| t.dot(q)).collect();
    let ws: Vec<f64> = pts.iter().map(|q| n.dot(q)).collect();
    let co = poly_fit(&ts, &ws, &[1, 2, 3, 4, 5, 6, 7], rho);
    [co[0], co[1], co[2]]
}

fn criterion_3() -> Check {
    let mut r = rng(3);
    let (mut beaks, mut lips) = (0, 0);
    let (mut worst_2jet, mut min_3gap) = (0.0f64, f64::INFINITY);
    for k in 0..50 {
        let (f, g) = case3a_pair(&mut r);
        let (cv, bv) = (c3(&f, &g, tol()).unwrap(), beaks_criterion(&f, &g, tol()).unwrap());
        ensure(bv.signum() == -cv.signum(), || format!("pair {k}: beaks {bv:e}, c3 {cv:e}"))?;
        let out = trace_binodal(&f, &g, &opts(0.05)).map_err(|e| format!("pair {k}: {e}"))?;
        if cv > 0.0 {
            lips += 1;
            ensure(out.isolated && out.curves.is_empty(), || format!("pair {k}: c3 > 0 but {} curves", out.curves.len()))?;
            continue;
        }
        beaks += 1;
        ensure(!out.isolated && out.curves.len() == 2, || {
            format!("pair {k}: c3 < 0 but isolated = {}, {} curves", out.isolated, out.curves.len())
        })?;
        let rho = 0.02;
        for first in [true, false] {
            let b0 = projected(&out.curves[0], first, rho);
            let b1 = projected(&out.curves[1], first, rho);
            let chord = |b: &[Vector2<f64>]| (b[b.len() - 1] - b[0]).normalize();
            let (d0, mut d1) = (chord(&b0), chord(&b1));
            if d0.dot(&d1) < 0.0 {
                d1 = -d1;
            }
            let t = (d0 + d1).normalize();
            let (j0, j1) = (graph_jet(&b0, &t, rho), graph_jet(&b1, &t, rho));
            let gap2 = (j0[0] - j1[0]).abs().max((j0[1] - j1[1]).abs());
            let gap3 = (j0[2] - j1[2]).abs();
            worst_2jet = worst_2jet.max(gap2);
            min_3gap = min_3gap.min(gap3);
            let side = if first { "M" } else { "N" };
            ensure(gap2 < 1e-6, || format!("pair {k}: 2-jets on {side} differ by {gap2:e}"))?;
            ensure(gap3 > 1e-4, || format!("pair {k}: 3-jets on {side} agree to {gap3:e}"))?;
        }
    }
    Ok(format!(
        "50 pairs ({beaks} beaks, {lips} lips): signs opposite, tracer agrees; 2-jet gap <= {worst_2jet:.1e}, 3-jet gap >= {min_3gap:.1e}"
    ))
}

fn criterion_4() -> Check {
    let g = Grid1::default_local();
    let spec = NormalFormSpec::new(CaseLabel::C3hat);
    let patch = criminant_numeric(&spec, g, g).map_err(|e| e.to_string())?;
    ensure(patch.skipped == 0, || format!("{} grid points skipped", patch.skipped))?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in patch.points() {
        let c = criminant_closed_form_c3(p.u, p.eps);
        for k in 0..3 {
            worst = worst.max((p.q[k] - c[k]).abs());
        }
        count += 1;
    }
    ensure(count == 200 * 200, || format!("{count} points"))?;
    ensure(worst <= 1e-9, || format!("closed form vs numeric {worst:e}"))?;
    let res = patch.max_residual();
    ensure(res < 1e-12, || format!("residual {res:e}"))?;
    let slice = binodal_from_normal_form(&spec, g).map_err(|e| e.to_string())?;
    let mut slice_err = 0.0f64;
    for p in slice.branches.iter().flatten() {
        slice_err = slice_err.max((p.q[0] - 2.0 * p.u.powi(3)).abs()).max((p.q[1] + 3.0 * p.u * p.u).abs()).max(p.q[2].abs());
    }
    ensure(slice.branches.len() == 1 && slice_err < 1e-15, || format!("slice error {slice_err:e}"))?;
    Ok(format!("200x200 grid: max |closed - numeric| = {worst:.1e}, max residual {res:.1e}, eps=0 slice is (2u^3, -3u^2)"))
}

fn criterion_5() -> Check {
    let delta = 0.05;
    let grid = Grid1::new(-0.5, 0.5, 201);
    let eps = Grid1::new(-0.5, 0.5, 21);
    let plus = sweep_family(&NormalFormSpec::new(CaseLabel::C3starPlus), &[-delta, 0.0, delta], grid, eps).map_err(|e| e.to_string())?;
    let shape: Vec<String> = plus
        .iter()
        .map(|fr| match (fr.binodal.point_count(), fr.binodal.closed.as_slice()) {
            (0, _) => "empty".to_string(),
            (1, _) => "point".to_string(),
            (_, [true]) => "loop".to_string(),
            (n, c) => format!("{n} points, closed {c:?}"),
        })
        .collect();
    // the loop sits on the τ < 0 side for the +q₂² form
    ensure(shape == ["loop", "point", "empty"], || format!("C3*+ slices at tau = -d, 0, +d: {shape:?}"))?;

    let taus: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.01).collect();
    let minus = sweep_family(&NormalFormSpec::new(CaseLabel::C3starMinus), &taus, grid, eps).map_err(|e| e.to_string())?;
    let seps: Vec<f64> = minus
        .iter()
        .map(|fr| {
            ensure(fr.binodal.branches.len() == 2, || format!("tau = {}: {} branches", fr.tau, fr.binodal.branches.len()))?;
            fr.binodal.min_branch_separation().ok_or_else(|| format!("tau = {}: no separation", fr.tau))
        })
        .collect::<Result<_, _>>()?;
    let zero = seps[8];
    ensure(zero == 0.0, || format!("separation at tau = 0 is {zero:e}"))?;
    for k in 0..8 {
        // separation shrinks toward τ = 0 from both sides
        ensure(seps[k] > seps[k + 1] && seps[16 - k] > seps[15 - k], || format!("separations not monotone: {seps:?}"))?;
    }
    Ok(format!(
        "C3*+: loop / point / empty at tau = -{delta} / 0 / +{delta}; C3*-: two branches at all 17 tau, separation {:.1e} -> 0 -> {:.1e}",
        seps[0], seps[16]
    ))
}

fn criterion_6() -> Check {
    let mut r = rng(6);
    let pairs = hand_pairs();
    let mut checked = 0;
    for (label, f, g) in &pairs {
        let got = classify(f, g, tol()).label;
        ensure(got == *label, || format!("built {label}, classified {got}"))?;
        for _ in 0..10 {
            let l = tie_preserving_map(&mut r);
            let got = classify(&f.compose_linear(l), &g.compose_linear(l), tol()).label;
            ensure(got == *label, || format!("{label} under {l:?}: {got}"))?;
            checked += 1;
        }
        for lambda in [0.5, 3.0] {
            let got = classify(&f.scaled(lambda), &g.scaled(lambda), tol()).label;
            ensure(got == *label, || format!("{label} scaled by {lambda}: {got}"))?;
            checked += 1;
        }
    }
    Ok(format!("{} hand-built pairs labelled as built; {checked} transformed copies keep their labels", pairs.len()))
}

/// Newton on `(A_VV, A_VVV) = 0` in `(V, T)`.
fn critical_oracle(p: &FluidParams) -> (f64, f64) {
    let (mut v, mut t) = (2.0 * p.b, 0.5 * p.a / (p.b * p.r));
    for _ in 0..100 {
        let d = v - p.b;
        let f1 = p.r * t / (d * d) - 2.0 * p.a / v.powi(3);
        let f2 = -2.0 * p.r * t / d.powi(3) + 6.0 * p.a / v.powi(4);
        let j = [[f2, p.r / (d * d)], [6.0 * p.r * t / d.powi(4) - 24.0 * p.a / v.powi(5), -2.0 * p.r / d.powi(3)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let dv = (f1 * j[1][1] - f2 * j[0][1]) / det;
        let dt = (j[0][0] * f2 - j[1][0] * f1) / det;
        v -= dv;
        t -= dt;
        if dv.abs() + dt.abs() < 1e-16 {
            break;
        }
    }
    (v, t)
}

fn criterion_7() -> Check {
    let p = FluidParams::reduced();
    let c = critical_point(&p);
    let (vo, to) = critical_oracle(&p);
    let err = (c.t - 1.0).abs().max((c.v - 1.0).abs()).max((c.p - 1.0).abs()).max((vo - c.v).abs()).max((to - c.t).abs());
    ensure(err < 1e-10, || format!("critical point {c:?}, oracle ({vo}, {to})"))?;
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for t in [0.85, 0.9, 0.95, 0.99] {
        let t0 = Instant::now();
        let m = maxwell_construction(t, &p, 1e-8).map_err(|e| format!("T = {t}: {e}"))?;
        let (_, _, p_area) = equal_area_bisection(t, &p).map_err(|e| format!("T = {t}: {e}"))?;
        let (vm, vp) = spinodal_single(t, &p).map_err(|e| format!("T = {t}: {e}"))?;
        let dt = t0.elapsed();
        slowest = slowest.max(dt);
        worst = worst.max((m.p_tie - p_area).abs());
        ensure((m.p_tie - p_area).abs() < 1e-8, || format!("T = {t}: P_tie {} vs {}", m.p_tie, p_area))?;
        ensure(m.v_liq < vm && vm < vp && vp < m.v_vap, || format!("T = {t}: ordering {m:?}, spinodal ({vm}, {vp})"))?;
        ensure(dt < Duration::from_secs(1), || format!("T = {t}: took {dt:?}"))?;
    }
    Ok(format!("critical point (1, 1, 1) to {err:.1e}; P_tie agreement {worst:.1e}; binodal encloses spinodal; slowest {slowest:.2?}"))
}

fn criterion_8() -> Check {
    let t = 0.8;
    let trace = TraceOptions { step: 2e-3, domain_bound: 0.45, ..Default::default() };

    let sym = MixtureParams::new(3.0, 3.0, 2.5, 1.0 / 3.0, 1.0 / 3.0, 8.0 / 3.0).map_err(|e| e.to_string())?;
    let seed = find_seed(t, &sym, 0.5).map_err(|e| e.to_string())?;
    let b = mixture_binodal(t, &sym, seed, 1.0, &trace).map_err(|e| e.to_string())?;
    let pts: Vec<Vector4<f64>> = b.pairs.iter().map(|q| Vector4::from(*q)).collect();
    let n = pts.len();
    let tans: Vec<Vector4<f64>> = (0..n).map(|k| (pts[(k + 1).min(n - 1)] - pts[k.saturating_sub(1)]).normalize()).collect();
    let mut worst_mirror = 0.0f64;
    for k in n / 20..n - n / 20 {
        let q = pts[k];
        let m = Vector4::new(q[0], 1.0 - q[1], q[2], 1.0 - q[3]);
        worst_mirror = worst_mirror.max((nearest_on_interpolant(&pts, &tans, &m) - m).norm());
    }
    ensure(worst_mirror < 1e-6, || format!("mirror distance {worst_mirror:e}"))?;

    let asym = MixtureParams::new(3.0, 2.0, 2.2, 1.0 / 3.0, 0.3, 8.0 / 3.0).map_err(|e| e.to_string())?;
    let mut worst_res = 0.0f64;
    let mut total = 0;
    for (m, x1) in [(sym, 0.5), (sym, 0.3), (asym, 0.5)] {
        let seed = find_seed(t, &m, x1).map_err(|e| e.to_string())?;
        let bin = mixture_binodal(t, &m, seed, 1.0, &trace).map_err(|e| e.to_string())?;
        for r in bin.residuals(t, &m) {
            worst_res = worst_res.max(r);
        }
        total += bin.pairs.len();
    }
    ensure(worst_res < 1e-8, || format!("equal-P / equal-intercept residual {worst_res:e}"))?;

    let pure = FluidParams::new(asym.a1, asym.b1, asym.r).map_err(|e| e.to_string())?;
    let lim = (mixture_helmholtz(1.7, 1.0 - 1e-12, t, &asym).map_err(|e| e.to_string())?
        - helmholtz_single(1.7, t, &pure).map_err(|e| e.to_string())?)
    .abs();
    ensure(lim < 1e-8, || format!("x -> 1 limit gap {lim:e}"))?;
    Ok(format!(
        "symmetric binodal ({n} pairs) mirror gap {worst_mirror:.1e}; {total} pairs with residual <= {worst_res:.1e}; x -> 1 gap {lim:.1e}"
    ))
}

/// Variety points on axis slices `z_i = c` of the box, by square Newton
/// from a coarse grid in the remaining coordinates.
fn slice_scan(f: &SurfaceJet, g: &SurfaceJet, bound: f64, spacing: f64) -> Vec<Vector4<f64>> {
    let starts: Vec<f64> = (0..4).map(|k| -bound + (k as f64 + 0.5) * bound / 2.0).collect();
    let slices = (2.0 * bound / spacing).round() as i64;
    let mut found: Vec<Vector4<f64>> = Vec::new();
    for axis in 0..4 {
        let free: Vec<usize> = (0..4).filter(|&i| i != axis).collect();
        for s in 0..=slices {
            let c = -bound + s as f64 * spacing;
            let mut here: Vec<Vector4<f64>> = Vec::new();
            for &a in &starts {
                for &b in &starts {
                    for &d in &starts {
                        let mut z = Vector4::zeros();
                        z[axis] = c;
                        z[free[0]] = a;
                        z[free[1]] = b;
                        z[free[2]] = d;
                        let mut ok = false;
                        for _ in 0..25 {
                            let p = ContactPair::from_vector(&z);
                            let h = evaluate_h(&p, f, g);
                            if h.norm() < 1e-13 {
                                ok = true;
                                break;
                            }
                            let j = jacobian_h(&p, f, g);
                            let m = Matrix3::from_columns(&[j.column(free[0]), j.column(free[1]), j.column(free[2])]);
                            let Some(dz) = m.lu().solve(&(-h)) else { break };
                            for k in 0..3 {
                                z[free[k]] += dz[k];
                            }
                            if z.amax() > 3.0 * bound {
                                break;
                            }
                        }
                        if ok && z.amax() <= bound && here.iter().all(|w| (w - z).norm() > 1e-9) {
                            here.push(z);
                        }
                    }
                }
            }
            found.extend(here);
        }
    }
    found
}

/// Splits scanned points into the chain-connected cluster through the origin
/// and the count of points on other components of the variety.
fn origin_component(points: &[Vector4<f64>], link: f64) -> (Vec<Vector4<f64>>, usize) {
    let n = points.len();
    let mut reached: Vec<bool> = points.iter().map(|p| p.norm() < link).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| reached[i]).collect();
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !reached[j] && (points[i] - points[j]).norm() < link {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    let inside: Vec<Vector4<f64>> = points.iter().zip(&reached).filter(|(_, r)| **r).map(|(p, _)| *p).collect();
    let others = n - inside.len();
    (inside, others)
}

fn segment_distance(p: &Vector4<f64>, a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared().max(1e-300)).clamp(0.0, 1.0);
    (p - (a + t * d)).norm()
}

fn criterion_9() -> Check {
    let mut r = rng(9);
    let (bound, step) = (0.1, 1e-3);
    let mut worst = 0.0f64;
    let mut scanned = 0;
    let mut elsewhere = 0;
    for k in 0..5 {
        let (f, g) = regular_pair(&mut r);
        let out = trace_binodal(&f, &g, &TraceOptions { domain_bound: bound, step, ..Default::default() }).map_err(|e| e.to_string())?;
        let traced: Vec<Vector4<f64>> = out.curves.iter().flat_map(|c| c.points.iter().map(|p| p.to_vector())).collect();
        let all = slice_scan(&f, &g, bound, step);
        scanned += all.len();
        let (scan, others) = origin_component(&all, 3.0 * step);
        elsewhere += others;
        let polyline_distance = |p: &Vector4<f64>| {
            out.curves
                .iter()
                .flat_map(|c| c.points.windows(2).map(|w| segment_distance(p, &w[0].to_vector(), &w[1].to_vector())))
                .fold(f64::INFINITY, f64::min)
        };
        let forward = scan.iter().map(polyline_distance).fold(0.0, f64::max);
        let backward = traced
            .iter()
            .map(|p| scan.iter().map(|s| (s - p).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let h = forward.max(backward);
        worst = worst.max(h);
        ensure(h <= 2.0 * step, || format!("pair {k}: Hausdorff {h:e} (scan->curve {forward:e}, curve->scan {backward:e})"))?;
    }
    Ok(format!(
        "5 pairs, {scanned} scanned variety points ({elsewhere} on other components); max Hausdorff distance {worst:.1e} <= {:.0e}",
        2.0 * step
    ))
}

fn main() {
    let checks: [(&str, fn() -> Check); 9] = [
        ("bitangency residual and tangent planes", criterion_1),
        ("cusp of the binodal on M opposite a parabolic point", criterion_2),
        ("lips / beaks dichotomy", criterion_3),
        ("C3 criminant cross-validation", criterion_4),
        ("normal-form sweeps", criterion_5),
        ("classifier totality and invariance", criterion_6),
        ("van der Waals single fluid", criterion_7),
        ("mixture pipeline", criterion_8),
        ("brute-force variety oracle", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let dt = t0.elapsed();
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{dt:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{dt:.2?}]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
