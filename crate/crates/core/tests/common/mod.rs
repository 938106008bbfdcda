#![allow(dead_code)]

use bitangent_core::bitangent::{evaluate_h, jacobian_h, kernel_vector};
use bitangent_core::{CaseLabel, ContactPair, SurfaceJet};
use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn jet(terms: &[((usize, usize), f64)]) -> SurfaceJet {
    SurfaceJet::from_terms(terms.iter().copied()).unwrap()
}

/// Uniform coefficients in `[-1, 1]` for every monomial of degree 2..=4.
pub fn random_jet(r: &mut impl Rng) -> SurfaceJet {
    let mut terms = Vec::new();
    for d in 2..=4 {
        for i in 0..=d {
            terms.push(((i, d - i), r.gen_range(-1.0..1.0)));
        }
    }
    jet(&terms)
}

/// Unit tangents of the variety at each point, oriented along the polyline.
pub fn tangents(points: &[ContactPair], f: &SurfaceJet, g: &SurfaceJet) -> Vec<Vector4<f64>> {
    let n = points.len();
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let t = kernel_vector(&jacobian_h(p, f, g)).normalize();
            let chord = points[(k + 1).min(n - 1)].to_vector() - points[k.saturating_sub(1)].to_vector();
            if t.dot(&chord) < 0.0 {
                -t
            } else {
                t
            }
        })
        .collect()
}

fn hermite(a: &Vector4<f64>, b: &Vector4<f64>, ta: &Vector4<f64>, tb: &Vector4<f64>, s: f64) -> Vector4<f64> {
    let c = (b - a).norm();
    let (s2, s3) = (s * s, s * s * s);
    a * (2.0 * s3 - 3.0 * s2 + 1.0) + ta * (c * (s3 - 2.0 * s2 + s)) + b * (-2.0 * s3 + 3.0 * s2) + tb * (c * (s3 - s2))
}

/// Point of the cubic Hermite interpolant of a sampled curve nearest to `p`.
pub fn nearest_on_interpolant(points: &[Vector4<f64>], tans: &[Vector4<f64>], p: &Vector4<f64>) -> Vector4<f64> {
    let k = (0..points.len())
        .min_by(|&i, &j| (points[i] - p).norm().total_cmp(&(points[j] - p).norm()))
        .unwrap();
    let mut best = points[k];
    for seg in [k.wrapping_sub(1), k] {
        if seg + 1 >= points.len() {
            continue;
        }
        let at = |s: f64| hermite(&points[seg], &points[seg + 1], &tans[seg], &tans[seg + 1], s);
        let d = |s: f64| (at(s) - p).norm();
        let s0 = (0..=32).map(|i| i as f64 / 32.0).min_by(|a, b| d(*a).total_cmp(&d(*b))).unwrap();
        let (mut lo, mut hi) = ((s0 - 1.0 / 32.0).max(0.0), (s0 + 1.0 / 32.0).min(1.0));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if d(m1) < d(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let q = at(0.5 * (lo + hi));
        if (q - p).norm() < (best - p).norm() {
            best = q;
        }
    }
    best
}

/// Distance from a variety point `p` to the branch through a sampled curve:
/// starting on the curve's interpolant, Newton moves onto the variety inside
/// the hyperplane through `p` normal to the local tangent.
pub fn distance_to_branch(points: &[Vector4<f64>], tans: &[Vector4<f64>], p: &Vector4<f64>, f: &SurfaceJet, g: &SurfaceJet) -> f64 {
    let mut z = nearest_on_interpolant(points, tans, p);
    let t = kernel_vector(&jacobian_h(&ContactPair::from_vector(&z), f, g)).normalize();
    for _ in 0..30 {
        let c = ContactPair::from_vector(&z);
        let h = evaluate_h(&c, f, g);
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 4>(0, 0).copy_from(&jacobian_h(&c, f, g));
        a.set_row(3, &t.transpose());
        let rhs = Vector4::new(-h[0], -h[1], -h[2], -t.dot(&(z - p)));
        let Some(dz) = a.lu().solve(&rhs) else { break };
        z += dz;
        if dz.norm() < 1e-15 {
            break;
        }
    }
    (z - p).norm()
}

/// One hand-built jet pair per case, with the label it was built for.
pub fn hand_pairs() -> Vec<(CaseLabel, SurfaceJet, SurfaceJet)> {
    let paraboloid = jet(&[((2, 0), 1.0), ((0, 2), 1.0)]);
    let cusp_f = jet(&[((0, 2), 1.0), ((3, 0), 1.0)]);
    let tilted_f = jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0), ((3, 0), 1.0)]);
    let generic_g = jet(&[((2, 0), 1.0), ((1, 1), 1.0), ((0, 2), 1.0)]);
    vec![
        (CaseLabel::B2hat, paraboloid, paraboloid),
        (CaseLabel::B3hat, paraboloid, jet(&[((2, 0), 1.0), ((1, 1), 1.0), ((0, 3), 1.0)])),
        (CaseLabel::B4hat, paraboloid, jet(&[((2, 0), 1.0), ((1, 1), 1.0), ((0, 4), 1.0)])),
        (CaseLabel::B3starstar, paraboloid, jet(&[((2, 0), 1.0), ((0, 3), 1.0)])),
        (CaseLabel::C3hat, cusp_f, generic_g),
        (CaseLabel::C3starPlus, cusp_f, jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0), ((3, 0), -1.0)])),
        (CaseLabel::C3starMinus, cusp_f, jet(&[((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0), ((3, 0), 1.0)])),
        (CaseLabel::C4hat, jet(&[((0, 2), 1.0), ((2, 1), 1.0), ((4, 0), -1.0)]), generic_g),
        (CaseLabel::C31hat, tilted_f, jet(&[((2, 0), 3.0), ((1, 1), 2.0), ((0, 2), 1.0)])),
        (CaseLabel::F4hat, tilted_f, jet(&[((2, 0), 1.0), ((1, 1), 1.0), ((0, 3), 1.0)])),
        (CaseLabel::ThreeE, jet(&[((2, 0), 1.0), ((0, 3), 1.0)]), jet(&[((2, 0), 2.0), ((0, 2), 1.0), ((3, 0), 1.0)])),
    ]
}

/// `(u, v) = L (u', v')` with `L = [[α, 0], [β, 1]]`: fixes the tie-line
/// direction, so it is a symmetry of the bitangent configuration.
pub fn tie_preserving_map(r: &mut impl Rng) -> [[f64; 2]; 2] {
    let alpha = r.gen_range(0.5..2.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    [[alpha, 0.0], [r.gen_range(-1.0..1.0), 1.0]]
}
