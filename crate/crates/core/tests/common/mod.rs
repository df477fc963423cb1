//! Reference implementations written independently of the library, used as
//! oracles by the integration tests.
#![allow(dead_code)]

use asset_forge::simplify::Quadric;
use asset_forge::Vec3;

/// Distance from `p` to segment `ab`.
pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t - p).norm()
}

/// Distance from `p` to triangle `abc`: the plane distance when the
/// projection falls inside, otherwise the nearest edge.
pub fn triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        let n = n / len;
        let q = p - n * (p - a).dot(&n);
        let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
        if inside {
            return (p - q).norm();
        }
    }
    segment_distance(p, a, b).min(segment_distance(p, b, c)).min(segment_distance(p, c, a))
}

/// Brute-force point-to-mesh distance.
pub fn mesh_distance(p: &Vec3, mesh: &asset_forge::mesh::TriangleMesh) -> f64 {
    (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Ray/triangle hit distance by solving the 3x3 system with Cramer's rule.
pub fn ray_triangle(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let m = nalgebra::Matrix3::from_columns(&[b - a, c - a, -d]);
    let det = m.determinant();
    if det.abs() < 1e-14 {
        return None;
    }
    let x = m.try_inverse()? * (o - a);
    let (u, v, t) = (x[0], x[1], x[2]);
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0 && t >= 0.0).then_some(t)
}

/// Brute-force first hit `(face, t)`, lower face index on ties.
pub fn first_hit(mesh: &asset_forge::mesh::TriangleMesh, o: &Vec3, d: &Vec3) -> Option<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(f);
        if let Some(t) = ray_triangle(o, d, &a, &b, &c) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((f as u32, t));
            }
        }
    }
    best
}

/// Number of texel centers `(x + 0.5, y + 0.5)` strictly inside the 2-D
/// triangle `p` (in texel units), found row by row from the edge crossings.
pub fn scanline_count(p: [[f64; 2]; 3], n: usize) -> usize {
    let mut count = 0;
    for y in 0..n {
        let yc = y as f64 + 0.5;
        let mut xs = Vec::new();
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            if (a[1] <= yc) != (b[1] <= yc) {
                xs.push(a[0] + (yc - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
            }
        }
        if xs.len() != 2 {
            continue;
        }
        let (lo, hi) = (xs[0].min(xs[1]), xs[0].max(xs[1]));
        count += (0..n).filter(|&x| (x as f64 + 0.5) > lo && (x as f64 + 0.5) < hi).count();
    }
    count
}

/// PSNR for values in [0, 1].
pub fn psnr(mse: f64) -> f64 {
    -10.0 * mse.log10()
}

/// Minimum of `E(v0 + t (v1 - v0))` over `t ∈ [0, 1]` from 10,001 samples,
/// refined by the parabola through the best sample and its neighbours
/// (exact, since the restriction of a quadric to a line is quadratic).
pub fn line_oracle(q: &Quadric, v0: &Vec3, v1: &Vec3) -> f64 {
    const N: usize = 10_000;
    let e = |t: f64| q.eval(&(v0 + (v1 - v0) * t));
    let (k, mut best) = (0..=N).map(|k| (k, e(k as f64 / N as f64))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let h = 1.0 / N as f64;
    let (lo, hi) = (k.saturating_sub(1), (k + 1).min(N));
    if lo < k && k < hi {
        let (t0, t1, t2) = (lo as f64 * h, k as f64 * h, hi as f64 * h);
        let (y0, y1, y2) = (e(t0), e(t1), e(t2));
        let curv = y0 - 2.0 * y1 + y2;
        if curv > 0.0 {
            let t = (t1 + 0.5 * h * (y0 - y2) / curv).clamp(t0, t2);
            best = best.min(e(t));
        }
    }
    best.max(0.0)
}
