//! Procedural meshes used by the examples, tests, and benchmarks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{TriangleMesh, UvLayer};
use crate::render::{render_geometry, standard_cameras, ColorImage};
use crate::{Vec2, Vec3};

/// Axis-aligned cube centered at the origin with the given side length.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side * 0.5;
    let positions = vec![
        Vec3::new(-h, -h, -h),
        Vec3::new(h, -h, -h),
        Vec3::new(h, h, -h),
        Vec3::new(-h, h, -h),
        Vec3::new(-h, -h, h),
        Vec3::new(h, -h, h),
        Vec3::new(h, h, h),
        Vec3::new(-h, h, h),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [1, 2, 6],
        [1, 6, 5],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new(positions, faces)
}

/// Welded cube with each side split into an `n x n` quad grid.
pub fn subdivided_cube(side: f64, n: usize) -> TriangleMesh {
    let mut builder = WeldBuilder::default();
    let h = side * 0.5;
    // (normal axis, sign); the two tangent axes follow a right-handed order.
    for axis in 0..3 {
        for &sign in &[1.0, -1.0] {
            let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
            let point = |i: usize, j: usize| {
                let mut p = Vec3::zeros();
                p[axis] = sign * h;
                p[ua] = -h + side * i as f64 / n as f64;
                p[va] = -h + side * j as f64 / n as f64;
                p
            };
            for i in 0..n {
                for j in 0..n {
                    let a = builder.vertex(point(i, j));
                    let b = builder.vertex(point(i + 1, j));
                    let c = builder.vertex(point(i + 1, j + 1));
                    let d = builder.vertex(point(i, j + 1));
                    if sign > 0.0 {
                        builder.faces.push([a, b, c]);
                        builder.faces.push([a, c, d]);
                    } else {
                        builder.faces.push([a, c, b]);
                        builder.faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    builder.finish()
}

/// Subdivided icosahedron on the unit sphere: `20 * 4^level` faces.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut m = [0u32; 3];
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                m[k] = *mid.entry(key).or_insert_with(|| {
                    let p = (positions[a as usize] + positions[b as usize]).normalize();
                    positions.push(p);
                    (positions.len() - 1) as u32
                });
            }
            next.push([f[0], m[0], m[2]]);
            next.push([f[1], m[1], m[0]]);
            next.push([f[2], m[2], m[1]]);
            next.push([m[0], m[1], m[2]]);
        }
        faces = next;
    }
    TriangleMesh::new(positions, faces)
}

/// Sphere of the given radius built by projecting a subdivided cube; no poles,
/// `12 n^2` faces.
pub fn cube_sphere(radius: f64, n: usize) -> TriangleMesh {
    let mut m = subdivided_cube(2.0, n);
    for p in &mut m.positions {
        *p = p.normalize() * radius;
    }
    m
}

/// Star-shaped closed surface: a cube-sphere whose radius is modulated by a
/// smooth random field of low-order waves; `12 n^2` faces.
pub fn displaced_sphere(n: usize, amplitude: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vec3, f64, f64)> = (0..6)
        .map(|_| {
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let freq = rng.random_range(2.0..7.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (dir, freq, phase)
        })
        .collect();
    let mut m = subdivided_cube(2.0, n);
    for p in &mut m.positions {
        let d = p.normalize();
        let r: f64 = 1.0
            + amplitude / waves.len() as f64
                * waves
                    .iter()
                    .map(|(w, f, ph)| (f * w.dot(&d) + ph).sin())
                    .sum::<f64>();
        *p = d * r;
    }
    m
}

/// Torus around the z axis with `nu` segments around the ring and `nv` around
/// the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = std::f64::consts::TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            positions.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(positions, faces)
}

/// Open cylinder side (no caps) around the z axis, `z` in `[-h/2, h/2]`.
pub fn cylinder_side(radius: f64, height: f64, segments: usize, rows: usize) -> TriangleMesh {
    let mut positions = Vec::new();
    for r in 0..=rows {
        let z = -height * 0.5 + height * r as f64 / rows as f64;
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            positions.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let idx = |r: usize, s: usize| (r * segments + s % segments) as u32;
    let mut faces = Vec::new();
    for r in 0..rows {
        for s in 0..segments {
            let a = idx(r, s);
            let b = idx(r, s + 1);
            let c = idx(r + 1, s + 1);
            let d = idx(r + 1, s);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(positions, faces)
}

/// Capped cylinder whose caps are annuli with a central hole of radius
/// `hole_radius` (0 closes the caps with a center vertex).
pub fn cylinder_with_cap_holes(
    radius: f64,
    height: f64,
    segments: usize,
    rows: usize,
    hole_radius: f64,
) -> TriangleMesh {
    let mut m = cylinder_side(radius, height, segments, rows);
    let rings = 4;
    for (cap_row, z, outward_up) in [(rows, height * 0.5, true), (0, -height * 0.5, false)] {
        let mut ring_idx: Vec<Vec<u32>> = Vec::new();
        ring_idx.push((0..segments).map(|s| (cap_row * segments + s) as u32).collect());
        for k in 1..=rings {
            let t = k as f64 / rings as f64;
            let rr = radius + (hole_radius - radius) * t;
            if rr <= 0.0 {
                break;
            }
            let mut ids = Vec::new();
            for s in 0..segments {
                let a = std::f64::consts::TAU * s as f64 / segments as f64;
                m.positions.push(Vec3::new(rr * a.cos(), rr * a.sin(), z));
                ids.push((m.positions.len() - 1) as u32);
            }
            ring_idx.push(ids);
        }
        for w in ring_idx.windows(2) {
            let (outer, inner) = (&w[0], &w[1]);
            for s in 0..segments {
                let a = outer[s];
                let b = outer[(s + 1) % segments];
                let c = inner[(s + 1) % segments];
                let d = inner[s];
                if outward_up {
                    m.faces.push([a, b, c]);
                    m.faces.push([a, c, d]);
                } else {
                    m.faces.push([a, c, b]);
                    m.faces.push([a, d, c]);
                }
            }
        }
        if hole_radius <= 0.0 {
            m.positions.push(Vec3::new(0.0, 0.0, z));
            let center = (m.positions.len() - 1) as u32;
            let last = ring_idx.last().unwrap().clone();
            for s in 0..segments {
                let a = last[s];
                let b = last[(s + 1) % segments];
                if outward_up {
                    m.faces.push([a, b, center]);
                } else {
                    m.faces.push([a, center, b]);
                }
            }
        }
    }
    m
}

/// Flat `n x n` quad grid on the unit square in the `z = 0` plane, facing +z.
pub fn plane_grid(n: usize) -> TriangleMesh {
    let mut positions = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            positions.push(Vec3::new(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriangleMesh::new(positions, faces)
}

/// Removes every face whose centroid lies within `angle` radians of `axis`
/// (as seen from the origin), leaving a hole.
pub fn puncture(mesh: &TriangleMesh, axis: Vec3, angle: f64) -> TriangleMesh {
    let axis = axis.normalize();
    let cos = angle.cos();
    mesh.filter_faces(|f| {
        let [a, b, c] = mesh.triangle(f);
        let centroid = (a + b + c) / 3.0;
        centroid.normalize().dot(&axis) < cos
    })
}

/// Reverses the winding of a random subset of faces.
pub fn scramble_winding(mesh: &TriangleMesh, fraction: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh.clone();
    for f in &mut out.faces {
        if rng.random_bool(fraction) {
            f.swap(1, 2);
        }
    }
    out
}

/// Unit-radius sphere containing a smaller concentric sphere.
pub fn nested_spheres(level: u32, inner_radius: f64) -> TriangleMesh {
    let outer = icosphere(level);
    let mut inner = icosphere(level);
    for p in &mut inner.positions {
        *p *= inner_radius;
    }
    outer.merged(&inner)
}

pub fn translated(mesh: &TriangleMesh, offset: Vec3) -> TriangleMesh {
    let mut out = mesh.clone();
    for p in &mut out.positions {
        *p += offset;
    }
    out
}

pub fn scaled(mesh: &TriangleMesh, s: f64) -> TriangleMesh {
    let mut out = mesh.clone();
    for p in &mut out.positions {
        *p *= s;
    }
    out
}

#[derive(Default)]
struct WeldBuilder {
    positions: Vec<Vec3>,
    lookup: HashMap<[i64; 3], u32>,
    faces: Vec<[u32; 3]>,
}

impl WeldBuilder {
    fn vertex(&mut self, p: Vec3) -> u32 {
        let key = [
            (p.x * 1e9).round() as i64,
            (p.y * 1e9).round() as i64,
            (p.z * 1e9).round() as i64,
        ];
        if let Some(&i) = self.lookup.get(&key) {
            return i;
        }
        self.positions.push(p);
        let i = (self.positions.len() - 1) as u32;
        self.lookup.insert(key, i);
        i
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.positions, self.faces)
    }
}

/// Square of side `size` centered at the origin, spanned by `a = +y` and
/// `b`, which is tilted `tilt_deg` out of the `yz` plane so the normal makes
/// that angle with `+x` (the front camera's viewing axis). UV `(0,0)..(1,1)`
/// follows `(a, b)`.
pub fn tilted_quad(tilt_deg: f64, size: f64) -> TriangleMesh {
    let t = tilt_deg.to_radians();
    let a = Vec3::y() * size;
    let b = Vec3::new(-t.sin(), 0.0, t.cos()) * size;
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let positions = corners.iter().map(|&(u, v)| a * (u - 0.5) + b * (v - 0.5)).collect();
    let mut m = TriangleMesh::new(positions, vec![[0, 1, 2], [0, 2, 3]]);
    m.uv = Some(UvLayer {
        coords: corners.iter().map(|&(u, v)| Vec2::new(u, v)).collect(),
        faces: m.faces.clone(),
    });
    m
}

/// Procedural surface color: smooth bands in three directions, so every
/// view of a fixture shows distinct, position-dependent texture.
pub fn albedo(p: &Vec3) -> [f32; 3] {
    let band = |v: f64, f: f64| (0.5 + 0.4 * (f * v).sin()) as f32;
    [band(p.x + 0.3 * p.z, 9.0), band(p.y - 0.2 * p.x, 11.0), band(p.z + 0.25 * p.y, 7.0)]
}

/// View images of `mesh` for the standard cameras: [`albedo`] at each
/// rendered surface point, mid gray behind. `mesh` must already be in the
/// camera frame (bounding sphere of radius 0.5 about the origin).
pub fn synthetic_views(mesh: &TriangleMesh, resolution: usize) -> Vec<ColorImage> {
    let set = render_geometry(mesh, &standard_cameras(resolution));
    set.views
        .iter()
        .map(|v| {
            let data = (0..v.face.len())
                .map(|i| {
                    if v.is_foreground(i) {
                        let p = v.position[i];
                        albedo(&Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
                    } else {
                        [0.5; 3]
                    }
                })
                .collect();
            ColorImage {
                width: resolution,
                height: resolution,
                data,
            }
        })
        .collect()
}
