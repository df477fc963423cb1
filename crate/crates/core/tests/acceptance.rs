//! Acceptance criteria 1-10. Prints one PASS / FAIL / SKIP line per
//! criterion and exits non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use asset_forge::bake::{bake_normal_map, unreliable_faces, BakeParams, TangentFrames};
use asset_forge::metrics::{baked_mean_error, distances, geo_mean_error, MetricParams, SurfaceSampler};
use asset_forge::pipeline::{self, run_pipeline, ColorSource, PipelineConfig, PipelineInputs, RunOptions};
use asset_forge::render::{render_geometry, standard_cameras, ColorImage, OrthoCamera};
use asset_forge::signfield::{make_watertight, SignParams, VoxelLabel};
use asset_forge::simplify::{place_contraction, simplify, BoundaryFlags, Placement, Quadric, SimplifyOptions};
use asset_forge::texfuse::mips::{bilinear, full_mip_count};
use asset_forge::texfuse::{backproject_view, blend, build_mips, edge_mask, AtlasGeometry, InpaintParams, Inpainter, Partial, SampleParams, STANDARD_PRIORS};
use asset_forge::uv::{segment_charts, segment_parallel, unwrap, SegmentParams, UnwrapParams};
use asset_forge::visibility::{cull_hidden, VisibilityParams};
use asset_forge::{fixtures, TriangleMesh, UvLayer, Vec2, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::*;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

// ------------------------------------------------------------------ 1

type Sdf = Box<dyn Fn(&Vec3) -> f64>;

/// Raw meshes with defects inside the sealing range of the default
/// dilation (gaps up to about four voxels at 128³).
fn raw_meshes() -> Vec<(String, TriangleMesh, Sdf)> {
    let mut out: Vec<(String, TriangleMesh, Sdf)> = Vec::new();
    let sphere = fixtures::icosphere(4);
    for k in 0..7 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k);
        let axis = random_unit(&mut rng);
        let angle = 0.02 + 0.009 * k as f64;
        let mut m = fixtures::puncture(&sphere, axis, angle);
        if k % 2 == 1 {
            m = fixtures::scramble_winding(&m, 0.2, k);
        }
        out.push((format!("sphere hole {angle:.2} rad"), m, Box::new(|p: &Vec3| p.norm() - 1.0)));
    }
    for k in 0..7u64 {
        let (big, small) = (0.35 + 0.02 * k as f64, 0.1 + 0.01 * k as f64);
        let m = fixtures::scramble_winding(&fixtures::torus(big, small, 64, 24), 0.1 + 0.1 * k as f64, k);
        out.push((
            format!("torus scrambled {:.0}%", 10.0 + 10.0 * k as f64),
            m,
            Box::new(move |p: &Vec3| {
                let q = Vec2::new((p.x * p.x + p.y * p.y).sqrt() - big, p.z);
                q.norm() - small
            }),
        ));
    }
    for k in 0..6 {
        let hole = 0.01 + 0.005 * k as f64;
        let (r, h) = (0.5, 1.2);
        let m = fixtures::cylinder_with_cap_holes(r, h, 64, 12, hole);
        out.push((
            format!("cylinder cap holes r={hole:.3}"),
            m,
            Box::new(move |p: &Vec3| {
                let d = Vec2::new((p.x * p.x + p.y * p.y).sqrt() - r, p.z.abs() - h * 0.5);
                d.x.max(d.y).min(0.0) + Vec2::new(d.x.max(0.0), d.y.max(0.0)).norm()
            }),
        ));
    }
    out
}

fn criterion_1() -> Verdict {
    let params = SignParams::default();
    let (mut closed, mut worst_agree, mut slowest) = (0, 1.0f64, 0.0f64);
    let meshes = raw_meshes();
    let mut failures = Vec::new();
    for (name, mesh, sdf) in &meshes {
        let t = Instant::now();
        let w = match make_watertight(mesh, &params) {
            Ok(w) => w,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let secs = t.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        if w.mesh.manifold_report().is_closed_manifold() {
            closed += 1;
        } else {
            failures.push(format!("{name}: not closed"));
        }
        let spec = &w.grid.spec;
        let [nx, ny, nz] = spec.resolution;
        let (mut agree, mut total) = (0usize, 0usize);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let d = sdf(&spec.center(x, y, z));
                    if d.abs() <= 1.5 * spec.voxel_size {
                        continue;
                    }
                    total += 1;
                    let interior = w.grid.labels[spec.index(x, y, z)] == VoxelLabel::Interior;
                    if interior == (d < 0.0) {
                        agree += 1;
                    }
                }
            }
        }
        let frac = agree as f64 / total as f64;
        worst_agree = worst_agree.min(frac);
        if frac < 0.995 {
            failures.push(format!("{name}: sign agreement {frac:.4}"));
        }
        if secs >= 10.0 {
            failures.push(format!("{name}: {secs:.1}s"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{closed}/{} closed manifold, worst sign agreement {:.2}%, slowest {slowest:.2}s{}",
            meshes.len(),
            100.0 * worst_agree,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// ------------------------------------------------------------------ 2 and 3

struct Simplified {
    dense: TriangleMesh,
    optimal: TriangleMesh,
    chamfer_optimal: f64,
    chamfer_midpoint: f64,
    seconds: f64,
}

fn simplified_set() -> &'static Vec<Simplified> {
    static SET: OnceLock<Vec<Simplified>> = OnceLock::new();
    SET.get_or_init(|| {
        let params = MetricParams {
            samples: 100_000,
            ..MetricParams::default()
        };
        (0..10u64)
            .map(|k| {
                let dense = fixtures::displaced_sphere(92, 0.02 + 0.005 * k as f64, 20 + k);
                let t = Instant::now();
                let (optimal, _) = simplify(&dense, &SimplifyOptions::new(5000, Placement::Optimal)).unwrap();
                let seconds = t.elapsed().as_secs_f64();
                let (midpoint, _) = simplify(&dense, &SimplifyOptions::new(5000, Placement::Midpoint)).unwrap();
                let chamfer_optimal = distances(&optimal, &dense, &params).unwrap().0;
                let chamfer_midpoint = distances(&midpoint, &dense, &params).unwrap().0;
                Simplified {
                    dense,
                    optimal,
                    chamfer_optimal,
                    chamfer_midpoint,
                    seconds,
                }
            })
            .collect()
    })
}

fn criterion_2() -> Verdict {
    let set = simplified_set();
    let faces = set.iter().map(|s| s.dense.face_count()).min().unwrap();
    let wins = set.iter().filter(|s| s.chamfer_optimal < s.chamfer_midpoint).count();
    let worst = set.iter().map(|s| s.chamfer_optimal / s.chamfer_midpoint).fold(0.0, f64::max);
    let slowest = set.iter().map(|s| s.seconds).fold(0.0, f64::max);
    let mean_gain = set.iter().map(|s| 1.0 - s.chamfer_optimal / s.chamfer_midpoint).sum::<f64>() / set.len() as f64;

    // 1-D placement oracle on random edges
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_oracle = 0.0f64;
    for _ in 0..10_000 {
        let v0 = random_unit(&mut rng);
        let v1 = v0 + random_unit(&mut rng) * 0.05;
        let mut near = |p: &Vec3| {
            (0..rng.random_range(3..7)).fold(Quadric::zero(), |acc, _| {
                let n = random_unit(&mut rng);
                let on = p + random_unit(&mut rng) * 0.02;
                acc + Quadric::from_plane(n, -n.dot(&on), rng.random_range(0.001..0.01))
            })
        };
        let (q0, q1) = (near(&v0), near(&v1));
        let c = place_contraction(&q0, &q1, &v0, &v1, (0, 1), BoundaryFlags::default()).unwrap();
        worst_oracle = worst_oracle.max((c.cost - common::line_oracle(&(q0 + q1), &v0, &v1)).abs());
    }
    verdict(
        faces >= 100_000 && wins >= 8 && worst <= 1.05 && slowest < 5.0 && worst_oracle <= 1e-9,
        format!(
            "{faces}+ faces -> 5000: optimal better in {wins}/10 (mean {:.1}% lower chamfer, worst ratio {worst:.3}), slowest {slowest:.2}s, oracle max |Δcost| {worst_oracle:.1e}",
            100.0 * mean_gain
        ),
    )
}

fn criterion_3() -> Verdict {
    let set = simplified_set();
    let mut wins = 0;
    let mut rows = Vec::new();
    for s in set {
        let lo = unwrap(&s.optimal, &UnwrapParams::default()).unwrap().mesh;
        let b = bake_normal_map(&lo, &s.dense, &BakeParams::default()).unwrap();
        let baked = baked_mean_error(&lo, &b.map, &s.dense, 10_000, 7).unwrap().mean_deg;
        let geo = geo_mean_error(&lo, &s.dense, 10_000, 7).unwrap().mean_deg;
        if baked < geo {
            wins += 1;
        }
        rows.push(format!("{baked:.2}/{geo:.2}"));
    }
    verdict(wins >= 9, format!("baked < geo in {wins}/10 (baked/geo °: {})", rows.join(" ")))
}

// ------------------------------------------------------------------ 4

fn criterion_4() -> Verdict {
    let inner_radius = 0.5;
    let mesh = fixtures::nested_spheres(3, inner_radius);
    let params = VisibilityParams::default();
    let (once, mask) = cull_hidden(&mesh, &params).unwrap();
    let inner = |f: usize| {
        let [a, b, c] = mesh.triangle(f);
        ((a + b + c) / 3.0).norm() < 0.5 * (1.0 + inner_radius)
    };
    let inner_kept = (0..mesh.face_count()).filter(|&f| inner(f) && mask.kept(f)).count();
    let outer_dropped = (0..mesh.face_count()).filter(|&f| !inner(f) && !mask.kept(f)).count();
    let (twice, _) = cull_hidden(&once, &params).unwrap();
    let idempotent = twice.faces == once.faces && twice.positions == once.positions;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cams: Vec<OrthoCamera> = (0..24).map(|_| OrthoCamera::looking(random_unit(&mut rng), Vec3::zeros(), 1.05, 256)).collect();
    let before = render_geometry(&mesh, &cams);
    let after = render_geometry(&once, &cams);
    let differing: usize = before
        .views
        .iter()
        .zip(&after.views)
        .map(|(a, b)| a.depth.iter().zip(&b.depth).filter(|(x, y)| x.to_bits() != y.to_bits()).count())
        .sum();
    verdict(
        inner_kept == 0 && outer_dropped == 0 && differing == 0 && idempotent,
        format!(
            "{} -> {} faces, inner kept {inner_kept}, outer dropped {outer_dropped}, {differing} differing depth pixels over 24 views, idempotent {idempotent}",
            mesh.face_count(),
            once.face_count()
        ),
    )
}

// ------------------------------------------------------------------ 5

fn fixture_set() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("cube", fixtures::cube(1.0)),
        ("subdivided cube", fixtures::subdivided_cube(1.0, 8)),
        ("icosphere", fixtures::icosphere(3)),
        ("cube sphere", fixtures::cube_sphere(1.0, 16)),
        ("displaced sphere", fixtures::displaced_sphere(30, 0.05, 1)),
        ("torus", fixtures::torus(0.35, 0.12, 64, 24)),
        ("cylinder", fixtures::cylinder_with_cap_holes(0.5, 1.2, 48, 8, 0.0)),
        ("open cylinder", fixtures::cylinder_side(0.5, 1.2, 48, 8)),
        ("plane", fixtures::plane_grid(20)),
        ("nested spheres", fixtures::nested_spheres(2, 0.5)),
    ]
}

fn rects_overlap(a: [usize; 4], b: [usize; 4]) -> bool {
    a[0] < b[0] + b[2] && b[0] < a[0] + a[2] && a[1] < b[1] + b[3] && b[1] < a[1] + a[3]
}

fn criterion_5() -> Verdict {
    let mut failures = Vec::new();
    let (mut charts, mut pairs) = (0, 0);
    for (name, mesh) in fixture_set() {
        let u = match unwrap(&mesh, &UnwrapParams::default()) {
            Ok(u) => u,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let mut owners = vec![0u32; mesh.face_count()];
        for c in &u.charts {
            for &f in &c.faces {
                owners[f as usize] += 1;
            }
        }
        if owners.iter().any(|&o| o != 1) {
            failures.push(format!("{name}: face not in exactly one chart"));
        }
        let negative = (0..u.mesh.face_count()).filter(|&f| u.mesh.uv_signed_area(f).is_none_or(|a| a <= 0.0)).count();
        if negative > 0 {
            failures.push(format!("{name}: {negative} non-positive UV triangles"));
        }
        let cells: Vec<[usize; 4]> = u.layout.placements.iter().map(|p| p.cell).collect();
        let res = u.layout.resolution;
        for i in 0..cells.len() {
            if cells[i][0] + cells[i][2] > res || cells[i][1] + cells[i][3] > res {
                failures.push(format!("{name}: chart {i} outside the atlas"));
            }
            for j in i + 1..cells.len() {
                pairs += 1;
                if rects_overlap(cells[i], cells[j]) {
                    failures.push(format!("{name}: charts {i} and {j} overlap"));
                }
            }
        }
        charts += u.charts.len();
        let p = SegmentParams::default();
        if segment_parallel(&mesh, 1, 3, &p) != segment_charts(&mesh, &p) {
            failures.push(format!("{name}: partitions = 1 differs from serial"));
        }
    }
    if !failures.is_empty() {
        return Fail(failures.join("; "));
    }
    let detail = format!("10 fixtures, {charts} charts, {pairs} rectangle pairs checked, partitions=1 == serial");

    let mesh = fixtures::displaced_sphere(41, 0.03, 5);
    let p = SegmentParams::default();
    let median = |f: &dyn Fn()| {
        let mut t: Vec<f64> = (0..5)
            .map(|_| {
                let s = Instant::now();
                f();
                s.elapsed().as_secs_f64()
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t[2]
    };
    let serial = median(&|| drop(segment_charts(&mesh, &p)));
    let parallel = median(&|| drop(segment_parallel(&mesh, 8, 3, &p)));
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let timing = format!("{} faces: serial {:.1} ms, 8 partitions {:.1} ms", mesh.face_count(), 1e3 * serial, 1e3 * parallel);
    if cores < 2 {
        return Skip(format!("{detail}; speedup not checked on {cores} core ({timing})"));
    }
    verdict(parallel < serial, format!("{detail}; {timing}"))
}

// ------------------------------------------------------------------ 6

/// Mean angle between decoded baked normals and the analytic unit-sphere
/// normal over reliable surface samples of `lo`.
fn analytic_sphere_error(lo: &TriangleMesh, map: &asset_forge::bake::NormalMap, samples: u64) -> f64 {
    let frames = TangentFrames::new(lo).unwrap();
    let unreliable = unreliable_faces(lo).unwrap();
    let sampler = SurfaceSampler::new(lo).unwrap();
    let (mut sum, mut n) = (0.0, 0);
    for i in 0..samples {
        let s = sampler.sample(3, i);
        if unreliable[s.face] {
            continue;
        }
        let got = asset_forge::bake::decode_world_normal(map, &frames, lo, s.face, s.bary).unwrap();
        sum += got.dot(&s.position.normalize()).clamp(-1.0, 1.0).acos().to_degrees();
        n += 1;
    }
    sum / n as f64
}

fn criterion_6() -> Verdict {
    let hi = fixtures::icosphere(5);
    // the icosahedron's face centers sit 0.2 inside the unit sphere, beyond
    // the default 1% search distance, so that distance is widened to 8%
    let lo = unwrap(&fixtures::icosphere(0), &UnwrapParams::default()).unwrap().mesh;
    let params = BakeParams {
        resolution: 1024,
        max_distance_fraction: 0.08,
        ..BakeParams::default()
    };
    let t = Instant::now();
    let b = bake_normal_map(&lo, &hi, &params).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = analytic_sphere_error(&lo, &b.map, 10_000);

    let same = unwrap(&fixtures::icosphere(2), &UnwrapParams::default()).unwrap().mesh;
    let bs = bake_normal_map(&same, &same, &BakeParams::default()).unwrap();
    let self_err = baked_mean_error(&same, &bs.map, &same, 10_000, 7).unwrap().mean_deg;
    verdict(
        err < 3.0 && self_err < 0.5 && secs < 3.0,
        format!(
            "{}-face icosahedron from {}-face sphere at 1024²: {err:.2}° vs analytic, identical-mesh {self_err:.3}°, bake {secs:.2}s",
            lo.face_count(),
            hi.face_count()
        ),
    )
}

// ------------------------------------------------------------------ 7

fn criterion_7() -> Verdict {
    let (size, atlas, res) = (0.7, 128usize, 1024usize);
    let tilt = 75f64.to_radians();
    let quad = fixtures::tilted_quad(75.0, size);
    let cam = standard_cameras(res)[0];
    // stripes along the quad's u axis, 0.4 texels per period: far above the
    // image's sampling rate along the foreshortened direction
    let period = 0.4 * size / atlas as f64;
    let stripe = |s: f64| 0.5 + 0.5 * (std::f64::consts::TAU * s / period).sin();
    let a = Vec3::y();
    let b = Vec3::new(-tilt.sin(), 0.0, tilt.cos());
    let origin = -a * (size * 0.5);

    let mut img = ColorImage::new(res, res, [0.5; 3]);
    for y in 0..res {
        for x in 0..res {
            let mut acc = 0.0;
            for k in 0..16 {
                let p = cam.unproject(x as f64 + ((k % 4) as f64 + 0.5) / 4.0, y as f64 + ((k / 4) as f64 + 0.5) / 4.0, 0.0);
                acc += stripe((p - origin).dot(&a));
            }
            img.data[y * res + x] = [(acc / 16.0) as f32; 3];
        }
    }
    let views = render_geometry(&quad, &[cam]);
    let view = &views.views[0];
    let geom = AtlasGeometry::new(&quad, atlas).unwrap();
    let chain = build_mips(&img, full_mip_count(res, res));
    let mask = edge_mask(view, 0.02, quad.bounds().diagonal());
    let part = backproject_view(&geom, view, &chain, &mask, &SampleParams::default(), None);

    let (mut se_aniso, mut se_bilinear, mut n) = (0.0, 0.0, 0usize);
    for i in 0..atlas * atlas {
        let (x, y) = (i % atlas, i / atlas);
        if x < 2 || y < 2 || x + 2 >= atlas || y + 2 >= atlas || !part.valid[i] {
            continue;
        }
        // reference: 256 stratified level-0 lookups over the texel's patch
        let mut r = 0.0;
        for k in 0..256 {
            let su = (x as f64 + ((k % 16) as f64 + 0.5) / 16.0) / atlas as f64;
            let sv = (y as f64 + ((k / 16) as f64 + 0.5) / 16.0) / atlas as f64;
            let q = cam.project(&(a * size * (su - 0.5) + b * size * (sv - 0.5)));
            r += bilinear(&img, q.x, q.y)[0];
        }
        r /= 256.0;
        let s = cam.project(&geom.position[i]);
        se_aniso += (part.color[i][0] as f64 - r).powi(2);
        se_bilinear += (bilinear(&img, s.x, s.y)[0] - r).powi(2);
        n += 1;
    }
    let aniso = common::psnr(se_aniso / n as f64);
    let single = common::psnr(se_bilinear / n as f64);
    verdict(
        n > 1000 && aniso >= 30.0 && aniso >= single + 3.0,
        format!("{n} texels: anisotropic {aniso:.1} dB, single-tap bilinear {single:.1} dB"),
    )
}

// ------------------------------------------------------------------ 8

fn criterion_8() -> Verdict {
    let (views, texels, alpha, eps) = (10usize, 10_000usize, 4.0, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut partials: Vec<Partial> = (0..views)
        .map(|_| Partial {
            color: Vec::with_capacity(texels),
            valid: Vec::with_capacity(texels),
        })
        .collect();
    let mut inc = vec![Vec::with_capacity(texels); views];
    for _ in 0..texels {
        for k in 0..views {
            partials[k].color.push([rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()]);
            partials[k].valid.push(rng.random_bool(0.8));
            inc[k].push(if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.05..1.0) });
        }
    }
    let out = blend(&partials, &inc, &STANDARD_PRIORS, alpha, eps).unwrap();
    let (mut worst_rel, mut hull_violations, mut mask_errors) = (0.0f64, 0, 0);
    for i in 0..texels {
        let live: Vec<usize> = (0..views).filter(|&k| partials[k].valid[i] && inc[k][i] > 0.0).collect();
        let w: Vec<f64> = live.iter().map(|&k| STANDARD_PRIORS[k] * inc[k][i].powf(alpha)).collect();
        let total: f64 = w.iter().sum();
        if (total > eps) != out.filled[i] {
            mask_errors += 1;
        }
        if !out.filled[i] {
            continue;
        }
        for ch in 0..3 {
            let direct = live.iter().zip(&w).map(|(&k, wk)| wk * partials[k].color[i][ch] as f64).sum::<f64>() / (total + eps);
            let got = out.color[i][ch] as f64;
            worst_rel = worst_rel.max((got - direct).abs() / direct.abs().max(1e-12));
            let lo = live.iter().map(|&k| partials[k].color[i][ch]).fold(f32::INFINITY, f32::min) as f64;
            let hi = live.iter().map(|&k| partials[k].color[i][ch]).fold(f32::NEG_INFINITY, f32::max) as f64;
            let shrink = total / (total + eps);
            if got < lo * shrink - 1e-6 || got > hi + 1e-6 {
                hull_violations += 1;
            }
        }
    }

    // exact cases
    let c = [0.2f32, 0.7, 0.9];
    let d = [0.6f32, 0.1, 0.3];
    let one = blend(&[Partial { color: vec![c], valid: vec![true] }], &[vec![0.7]], &[0.3], alpha, 0.0).unwrap();
    let single_exact = one.color[0] == c;
    let two = blend(
        &[Partial { color: vec![c], valid: vec![true] }, Partial { color: vec![d], valid: vec![true] }],
        &[vec![0.5], vec![0.5]],
        &[1.0, 1.0],
        alpha,
        0.0,
    )
    .unwrap();
    let avg: [f32; 3] = std::array::from_fn(|k| ((c[k] as f64 + d[k] as f64) * 0.5) as f32);
    let average_exact = two.color[0] == avg;
    verdict(
        worst_rel <= 1e-5 && hull_violations == 0 && mask_errors == 0 && single_exact && average_exact,
        format!(
            "{texels} texels x {views} views: max relative error {worst_rel:.1e}, {hull_violations} hull violations, {mask_errors} mask errors; single-view exact {single_exact}, two-view average exact {average_exact}"
        ),
    )
}

// ------------------------------------------------------------------ 9

fn criterion_9() -> Verdict {
    // chart A: unit square at z = 0, left half of the atlas; chart B: a copy
    // 5 units away, right half of the atlas. The hole is the strip of A next
    // to B in UV space.
    let quad = |z: f64| [Vec3::new(0.0, 0.0, z), Vec3::new(1.0, 0.0, z), Vec3::new(1.0, 1.0, z), Vec3::new(0.0, 1.0, z)];
    let positions: Vec<Vec3> = quad(0.0).into_iter().chain(quad(5.0)).collect();
    let faces = vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]];
    let uv_rect = |u0: f64, u1: f64| [Vec2::new(u0, 0.02), Vec2::new(u1, 0.02), Vec2::new(u1, 0.98), Vec2::new(u0, 0.98)];
    let coords: Vec<Vec2> = uv_rect(0.02, 0.49).into_iter().chain(uv_rect(0.51, 0.98)).collect();
    let mut mesh = TriangleMesh::new(positions, faces.clone());
    mesh.uv = Some(UvLayer { coords, faces });

    let res = 128;
    let geom = AtlasGeometry::new(&mesh, res).unwrap();
    let red = [1.0f32, 0.0, 0.0];
    let blue = [0.0f32, 0.0, 1.0];
    let mut color = vec![[0.0f32; 3]; res * res];
    let mut filled = vec![false; res * res];
    let mut hole = Vec::new();
    for i in 0..res * res {
        if !geom.valid[i] {
            continue;
        }
        let u = ((i % res) as f64 + 0.5) / res as f64;
        if u > 0.5 {
            color[i] = blue;
            filled[i] = true;
        } else if u < 0.38 {
            color[i] = red;
            filled[i] = true;
        } else {
            hole.push(i);
        }
    }
    let inp = Inpainter::new(&geom.position, &geom.normal, &filled).unwrap();
    let sigma = 0.02 * mesh.bounds().diagonal();
    let params = InpaintParams::default();
    let (c1, f1) = inp.apply(&color, &filled, &geom.valid, &geom.position, &geom.normal, sigma, &params);
    let from_near = hole.iter().filter(|&&i| (0..3).all(|k| (c1[i][k] - red[k]).abs() < 1e-6)).count();
    let total = (0..res * res).all(|i| !geom.valid[i] || f1[i]);
    let inp2 = Inpainter::new(&geom.position, &geom.normal, &f1).unwrap();
    let (c2, f2) = inp2.apply(&c1, &f1, &geom.valid, &geom.position, &geom.normal, sigma, &params);
    let idempotent = c2 == c1 && f2 == f1;
    verdict(
        !hole.is_empty() && from_near == hole.len() && total && idempotent,
        format!("{from_near}/{} hole texels took the 3D-near chart's color, fill mask total {total}, idempotent {idempotent}", hole.len()),
    )
}

// ------------------------------------------------------------------ 10

fn criterion_10() -> Verdict {
    let mut dense = fixtures::displaced_sphere(130, 0.03, 10);
    pipeline::normalize_input(&mut dense);
    let config = PipelineConfig::flash();
    let colors = fixtures::synthetic_views(&dense, config.view_resolution);
    let faces = dense.face_count();
    let inputs = PipelineInputs {
        dense,
        colors: ColorSource::Decoded(colors),
    };
    let tmp = tempfile::tempdir().unwrap();
    let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
    let (mut identical, mut crit_ok, mut slowest) = (true, true, 0.0f64);
    let mut timing = String::new();
    for run in 0..5 {
        let out = tmp.path().join(format!("run{run}"));
        let t = Instant::now();
        let r = run_pipeline(&config, &inputs, &out, &RunOptions::default()).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        crit_ok &= r.timing.critical_path < r.timing.sum_of_stages;
        timing = format!("critical path {:.2}s vs sum {:.2}s", r.timing.critical_path, r.timing.sum_of_stages);
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        match &reference {
            None => reference = Some(files),
            Some(f) => identical &= f == &files,
        }
    }
    let n_files = reference.as_ref().map_or(0, Vec::len);
    verdict(
        faces >= 200_000 && identical && crit_ok && slowest < 60.0,
        format!("{faces}-face input, 5 runs: {n_files} files bit-identical {identical}; {timing} (last run); slowest run {slowest:.1}s"),
    )
}

// ------------------------------------------------------------------ main

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("watertightness", criterion_1),
        ("simplification placement", criterion_2),
        ("baked vs geometric normal error", criterion_3),
        ("hidden-face removal", criterion_4),
        ("UV validity", criterion_5),
        ("normal baking quality", criterion_6),
        ("anisotropic backprojection", criterion_7),
        ("blend correctness", criterion_8),
        ("inpainting", criterion_9),
        ("determinism and critical path", criterion_10),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Skip(d) => ("SKIP", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} {name} [{secs:.1}s]: {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
