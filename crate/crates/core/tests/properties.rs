//! Module invariants as property tests.

mod common;

use asset_forge::bake::{decode, encode};
use asset_forge::metrics::{distances, MetricParams};
use asset_forge::render::{render_geometry, standard_cameras, OrthoCamera};
use asset_forge::signfield::{make_watertight, SignParams, VoxelLabel};
use asset_forge::simplify::{place_contraction, place_midpoint, simplify, BoundaryFlags, Placement, Quadric, SimplifyOptions};
use asset_forge::spatial::Bvh;
use asset_forge::texfuse::blend;
use asset_forge::texfuse::{Partial, SampleParams, TexelFootprint};
use asset_forge::uv::{segment_charts, segment_parallel, SegmentParams};
use asset_forge::uv::{unwrap, UnwrapParams};
use asset_forge::visibility::{cull_hidden, VisibilityParams};
use asset_forge::{fixtures, TriangleMesh, Vec3};
use nalgebra::Matrix2;
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter("non-degenerate", |v| v.norm() > 0.1).prop_map(|v| v.normalize())
}

/// Random triangle soup with non-degenerate faces.
fn soup(max: usize) -> impl Strategy<Value = TriangleMesh> {
    prop::collection::vec((vec3(1.0), vec3(0.3), vec3(0.3)), 1..max).prop_map(|tris| {
        let mut positions = Vec::new();
        let mut faces = Vec::new();
        for (a, db, dc) in tris {
            if db.cross(&dc).norm() < 1e-4 {
                continue;
            }
            let i = positions.len() as u32;
            positions.extend([a, a + db, a + dc]);
            faces.push([i, i + 1, i + 2]);
        }
        if faces.is_empty() {
            positions = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
            faces.push([0, 1, 2]);
        }
        TriangleMesh::new(positions, faces)
    })
}

/// Bumpy sphere with a random seed and amplitude.
fn bumpy() -> impl Strategy<Value = TriangleMesh> {
    (0u64..1000, 0.0..0.08f64, 8usize..14).prop_map(|(seed, amp, n)| fixtures::displaced_sphere(n, amp, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bvh_leaves_partition_faces(mesh in soup(200)) {
        let bvh = Bvh::build(&mesh).unwrap();
        prop_assert!(bvh.validate());
        prop_assert!(bvh.depth() <= 64);
        let mut seen: Vec<u32> = bvh.leaf_faces().into_iter().flatten().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..mesh.face_count() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn raycast_is_the_nearest_hit(mesh in soup(80), o in vec3(2.0), d in unit()) {
        let bvh = Bvh::build(&mesh).unwrap();
        let got = bvh.raycast_first(&o, &d);
        let want = common::first_hit(&mesh, &o, &d);
        match (got, want) {
            (Some(h), Some((_, t))) => {
                prop_assert!((h.t - t).abs() < 1e-9);
                prop_assert!(h.barycentric.iter().all(|b| (-1e-9..=1.0 + 1e-9).contains(b)));
                let [a, b, c] = mesh.triangle(h.face as usize);
                let p = a * h.barycentric[0] + b * h.barycentric[1] + c * h.barycentric[2];
                prop_assert!((p - (o + d * h.t)).norm() < 1e-9);
            }
            (None, None) => {}
            (g, w) => prop_assert!(false, "bvh {:?} vs brute {:?}", g, w),
        }
    }

    #[test]
    fn closest_point_is_zero_on_the_surface(mesh in soup(60), f in any::<prop::sample::Index>(), r1 in 0.0..1.0f64, r2 in 0.0..1.0f64, q in vec3(2.0)) {
        let bvh = Bvh::build(&mesh).unwrap();
        let face = f.index(mesh.face_count());
        let [a, b, c] = mesh.triangle(face);
        let s = r1.sqrt();
        let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        prop_assert!(bvh.closest_point(&p).distance < 1e-9);
        let cp = bvh.closest_point(&q);
        prop_assert!(cp.distance >= 0.0);
        prop_assert!((cp.distance - common::mesh_distance(&q, &mesh)).abs() < 1e-12);
    }

    #[test]
    fn quadric_is_nonnegative_and_symmetric(planes in prop::collection::vec((unit(), -1.0..1.0f64, 0.01..2.0f64), 1..8), v in vec3(5.0)) {
        let q = planes.iter().fold(Quadric::zero(), |acc, &(n, d, w)| acc + Quadric::from_plane(n, d, w));
        prop_assert!(q.is_symmetric());
        prop_assert!(q.eval(&v) >= -1e-9);
    }

    #[test]
    fn optimal_placement_dominates_midpoint(
        p0 in prop::collection::vec((unit(), vec3(0.05), 0.01..1.0f64), 1..6),
        p1 in prop::collection::vec((unit(), vec3(0.05), 0.01..1.0f64), 1..6),
        v0 in vec3(1.0),
        dv in vec3(0.2),
    ) {
        let v1 = v0 + dv;
        let build = |planes: &[(Vec3, Vec3, f64)], at: &Vec3| planes.iter().fold(Quadric::zero(), |acc, (n, off, w)| {
            acc + Quadric::from_plane(*n, -n.dot(&(at + off)), *w)
        });
        let (q0, q1) = (build(&p0, &v0), build(&p1, &v1));
        let flags = BoundaryFlags::default();
        let opt = place_contraction(&q0, &q1, &v0, &v1, (0, 1), flags).unwrap();
        let mid = place_midpoint(&q0, &q1, &v0, &v1, (0, 1), flags).unwrap();
        prop_assert!(opt.cost <= mid.cost + 1e-12);
        // the target always lies on the edge
        let t = (opt.target - v0).dot(&dv) / dv.norm_squared().max(1e-300);
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&t));
        prop_assert!((v0 + dv * t - opt.target).norm() < 1e-9 * (1.0 + v0.norm()));
    }

    #[test]
    fn encoded_normals_decode_to_unit_length(n in unit()) {
        let d = decode(encode(&n));
        prop_assert!((0.99..=1.01).contains(&d.norm()));
        prop_assert!(d.normalize().dot(&n) > (1.0f64).to_radians().cos());
    }

    #[test]
    fn camera_axes_are_orthonormal(d in unit(), r in 1usize..64) {
        let cam = OrthoCamera::looking(d, Vec3::zeros(), 1.0, r);
        prop_assert!(cam.direction.dot(&cam.up).abs() < 1e-6);
        prop_assert!((cam.right().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn footprint_invariants(a in -20.0..20.0f64, b in -20.0..20.0f64, c in -20.0..20.0f64, d in -20.0..20.0f64) {
        let fp = TexelFootprint::new(Matrix2::new(a, b, c, d), &SampleParams::default());
        prop_assert!(fp.major >= fp.minor && fp.minor >= 0.0);
        prop_assert!(fp.mip >= 0.0);
        let want = if fp.minor > 0.0 { ((fp.major / fp.minor) - 1e-9).ceil().clamp(1.0, 8.0) as usize } else if fp.major > 0.0 { 8 } else { 1 };
        prop_assert_eq!(fp.taps, want);
        // singular values reproduce the Frobenius norm and |det|
        prop_assert!((fp.major.powi(2) + fp.minor.powi(2) - (a * a + b * b + c * c + d * d)).abs() < 1e-8 * (1.0 + a * a + b * b + c * c + d * d));
        prop_assert!((fp.major * fp.minor - (a * d - b * c).abs()).abs() < 1e-6 * (1.0 + fp.major * fp.major));
    }

    #[test]
    fn blend_is_convex_and_prior_scale_invariant(
        views in prop::collection::vec((prop::collection::vec(0.0..1.0f32, 3), 0.0..1.0f64, 0.001..1.0f64, any::<bool>()), 1..10),
        scale in 0.01..100.0f64,
    ) {
        let partials: Vec<Partial> = views.iter().map(|(c, _, _, ok)| Partial { color: vec![[c[0], c[1], c[2]]], valid: vec![*ok] }).collect();
        let inc: Vec<Vec<f64>> = views.iter().map(|v| vec![v.1]).collect();
        let priors: Vec<f64> = views.iter().map(|v| v.2).collect();
        let scaled: Vec<f64> = priors.iter().map(|p| p * scale).collect();
        let a = blend(&partials, &inc, &priors, 4.0, 0.0).unwrap();
        let b = blend(&partials, &inc, &scaled, 4.0, 0.0).unwrap();
        prop_assert_eq!(a.filled[0], b.filled[0]);
        if a.filled[0] {
            let live: Vec<&(Vec<f32>, f64, f64, bool)> = views.iter().filter(|v| v.3 && v.1 > 0.0).collect();
            for ch in 0..3 {
                let lo = live.iter().map(|v| v.0[ch]).fold(f32::INFINITY, f32::min);
                let hi = live.iter().map(|v| v.0[ch]).fold(f32::NEG_INFINITY, f32::max);
                prop_assert!(a.color[0][ch] >= lo - 1e-5 && a.color[0][ch] <= hi + 1e-5);
                prop_assert!((a.color[0][ch] - b.color[0][ch]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zeroing_a_silent_view_changes_nothing(
        views in prop::collection::vec((prop::collection::vec(0.0..1.0f32, 3), 0.0..1.0f64, 0.001..1.0f64), 2..10),
        k in any::<prop::sample::Index>(),
    ) {
        let k = k.index(views.len());
        let partials: Vec<Partial> = views.iter().map(|(c, _, _)| Partial { color: vec![[c[0], c[1], c[2]]], valid: vec![true] }).collect();
        let priors: Vec<f64> = views.iter().map(|v| v.2).collect();
        let mut inc: Vec<Vec<f64>> = views.iter().map(|v| vec![v.1]).collect();
        inc[k][0] = 0.0;
        let before = blend(&partials, &inc, &priors, 4.0, 1e-8).unwrap();
        let mut invalid = partials.clone();
        invalid[k].valid[0] = false;
        let after = blend(&invalid, &inc, &priors, 4.0, 1e-8).unwrap();
        prop_assert_eq!(before, after);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simplify_costs_are_consistent_and_deterministic(mesh in bumpy(), frac in 0.2..0.6f64) {
        let target = ((mesh.face_count() as f64 * frac) as usize).max(8);
        let mut opts = SimplifyOptions::new(target, Placement::Optimal);
        opts.record_collapses = true;
        let (a, report) = simplify(&mesh, &opts).unwrap();
        let (b, _) = simplify(&mesh, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        for c in &report.log {
            let e = c.quadric.eval(&c.candidate.target).max(0.0);
            prop_assert!((e - c.candidate.cost).abs() < 1e-9 * (1.0 + e));
        }
        let r = a.manifold_report();
        prop_assert_eq!(r.nonmanifold_edges, 0);
        prop_assert!(a.face_count() <= mesh.face_count());
    }

    #[test]
    fn watertight_output_is_closed_and_labels_partition(scale in 0.3..1.0f64, offset in vec3(0.2), level in 1u32..4) {
        let mesh = fixtures::translated(&fixtures::scaled(&fixtures::icosphere(level), scale), offset);
        let params = SignParams { resolution: 32, ..SignParams::default() };
        let w = make_watertight(&mesh, &params).unwrap();
        prop_assert!(w.mesh.manifold_report().is_closed_manifold());
        let labels = &w.grid.labels;
        let ext = w.grid.count(VoxelLabel::Exterior);
        let int = w.grid.count(VoxelLabel::Interior);
        prop_assert_eq!(ext + int, labels.len());
    }

    #[test]
    fn culling_is_idempotent_and_keeps_silhouettes(inner in 0.2..0.8f64, level in 1u32..3) {
        let mesh = fixtures::nested_spheres(level, inner);
        let params = VisibilityParams { viewpoints: 24, resolution: 128, ..VisibilityParams::default() };
        let (once, _) = cull_hidden(&mesh, &params).unwrap();
        let (twice, _) = cull_hidden(&once, &params).unwrap();
        prop_assert_eq!(&once.faces, &twice.faces);
        let cams = asset_forge::visibility::view_cameras(&mesh, 24, 128);
        let before = render_geometry(&mesh, &cams);
        let after = render_geometry(&once, &cams);
        for (x, y) in before.views.iter().zip(&after.views) {
            prop_assert_eq!(&x.depth, &y.depth);
        }
    }

    #[test]
    fn unwrap_covers_every_face_with_positive_area(mesh in bumpy()) {
        let u = unwrap(&mesh, &UnwrapParams { atlas_resolution: 512, ..UnwrapParams::default() }).unwrap();
        let mut count = vec![0u32; mesh.face_count()];
        for c in &u.charts {
            for &f in &c.faces {
                count[f as usize] += 1;
            }
        }
        prop_assert!(count.iter().all(|&c| c == 1));
        for f in 0..u.mesh.face_count() {
            prop_assert!(u.mesh.uv_signed_area(f).unwrap() > 0.0);
        }
        prop_assert!(u.layout.is_valid());
    }

    #[test]
    fn one_partition_equals_serial(mesh in bumpy()) {
        let p = SegmentParams::default();
        prop_assert_eq!(segment_parallel(&mesh, 1, 3, &p), segment_charts(&mesh, &p));
    }

    #[test]
    fn metrics_are_symmetric_and_ordered(a in bumpy(), b in bumpy(), seed in any::<u64>()) {
        let params = MetricParams { samples: 2000, seed, ..MetricParams::default() };
        let (cab, hab) = distances(&a, &b, &params).unwrap();
        let (cba, hba) = distances(&b, &a, &params).unwrap();
        prop_assert_eq!(cab.to_bits(), cba.to_bits());
        prop_assert_eq!(hab.to_bits(), hba.to_bits());
        prop_assert!(0.0 <= cab && cab <= hab);
    }

    #[test]
    fn rendered_depth_matches_positions(mesh in bumpy()) {
        let mut mesh = mesh;
        mesh.normalize_to_sphere(0.5);
        let set = render_geometry(&mesh, &standard_cameras(64));
        for v in &set.views {
            let d = -v.camera.direction;
            for i in 0..v.depth.len() {
                if v.is_foreground(i) {
                    let p = v.position[i];
                    let dd = p[0] as f64 * d.x + p[1] as f64 * d.y + p[2] as f64 * d.z;
                    prop_assert!((dd - v.depth[i] as f64).abs() < 1e-5);
                } else {
                    prop_assert_eq!(v.depth[i], f32::INFINITY);
                }
            }
        }
    }
}
