//! Tangent-space normal baking.
//!
//! The low-poly mesh is rasterized into its own UV layout to get one
//! surface point and tangent frame per texel (the [`GBuffer`]). Each texel
//! then looks up the closest point on the dense mesh and stores that point's
//! smooth normal, expressed in the texel's frame, as RGB8.
//!
//! UV texel `(x, y)` has its center at `((x + 0.5) / res, (y + 0.5) / res)`;
//! `v` grows with the row index.

use rayon::prelude::*;

use crate::mesh::{cross2, TriangleMesh};
use crate::render::for_each_covered;
use crate::spatial::{Bvh, SpatialError};
use crate::{Vec2, Vec3};

pub const NO_FACE: u32 = u32::MAX;
/// Encoding of the flat tangent-space normal `(0, 0, 1)`.
pub const FLAT: [u8; 3] = [128, 128, 255];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BakeError {
    #[error("mesh has no UV layer")]
    MissingUv,
    #[error("texel ({x}, {y}) is claimed by UV triangles {first} and {second}")]
    AtlasOverlap { x: usize, y: usize, first: u32, second: u32 },
    #[error("invalid resolution {0}")]
    InvalidResolution(usize),
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BakeParams {
    pub resolution: usize,
    /// Distance filter as a fraction of the dense mesh's bounding-box diagonal.
    pub max_distance_fraction: f64,
    /// Seam dilation radius in texels.
    pub dilation: usize,
}

impl Default for BakeParams {
    fn default() -> Self {
        Self {
            resolution: 1024,
            max_distance_fraction: 0.01,
            dilation: 4,
        }
    }
}

/// Per-corner tangents and smooth normals of a UV-mapped mesh.
///
/// Face tangents are `∂p/∂u` from the UV gradients, accumulated per UV
/// vertex weighted by the corner angle. A frame at any surface point
/// interpolates both and orthonormalizes: `T` is made perpendicular to the
/// smooth normal `N`, and `B = N × T`, so `(T, B, N)` is right-handed.
#[derive(Debug, Clone)]
pub struct TangentFrames {
    /// Indexed like `UvLayer::coords`.
    tangents: Vec<Vec3>,
    normals: Vec<Vec3>,
    face_tangents: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    uv_faces: Vec<[u32; 3]>,
}

impl TangentFrames {
    pub fn new(mesh: &TriangleMesh) -> Result<Self, BakeError> {
        let uv = mesh.uv.as_ref().ok_or(BakeError::MissingUv)?;
        let mut tangents = vec![Vec3::zeros(); uv.coords.len()];
        let mut face_tangents = Vec::with_capacity(mesh.face_count());
        for f in 0..mesh.face_count() {
            let p = mesh.triangle(f);
            let t = uv.faces[f].map(|i| uv.coords[i as usize]);
            let ft = uv_gradient_u(&p, &t).unwrap_or_else(Vec3::zeros);
            face_tangents.push(ft);
            if ft == Vec3::zeros() {
                continue;
            }
            for c in 0..3 {
                let a = p[(c + 1) % 3] - p[c];
                let b = p[(c + 2) % 3] - p[c];
                let angle = a.angle(&b);
                if angle.is_finite() {
                    tangents[uv.faces[f][c] as usize] += ft * angle;
                }
            }
        }
        Ok(Self {
            tangents,
            normals: mesh.smooth_normals(),
            face_tangents,
            faces: mesh.faces.clone(),
            uv_faces: uv.faces.clone(),
        })
    }

    /// Orthonormal `(T, B, N)` at barycentric `bary` of face `f`.
    pub fn frame(&self, f: usize, bary: [f64; 3]) -> [Vec3; 3] {
        let vi = self.faces[f];
        let ti = self.uv_faces[f];
        let mut n = Vec3::zeros();
        let mut t = Vec3::zeros();
        for c in 0..3 {
            n += self.normals[vi[c] as usize] * bary[c];
            t += self.tangents[ti[c] as usize] * bary[c];
        }
        let n = n.try_normalize(1e-300).unwrap_or_else(Vec3::z);
        let t = orthogonalize(&t, &n)
            .or_else(|| orthogonalize(&self.face_tangents[f], &n))
            .unwrap_or_else(|| any_perpendicular(&n));
        [t, n.cross(&t), n]
    }
}

/// `∂p/∂u` over a triangle, if its UV map is not degenerate.
fn uv_gradient_u(p: &[Vec3; 3], t: &[Vec2; 3]) -> Option<Vec3> {
    let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
    let (d1, d2) = (t[1] - t[0], t[2] - t[0]);
    let r = cross2(&d1, &d2);
    if r == 0.0 || !r.is_finite() {
        return None;
    }
    Some((e1 * d2.y - e2 * d1.y) / r)
}

fn orthogonalize(t: &Vec3, n: &Vec3) -> Option<Vec3> {
    (t - n * n.dot(t)).try_normalize(1e-12)
}

fn any_perpendicular(n: &Vec3) -> Vec3 {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (helper - n * n.dot(&helper)).normalize()
}

/// Faces whose UV area is below `1e-8` of the atlas or whose UV-to-3D area
/// ratio is more than 100× off their chart's median. Charts are the
/// connected components of faces sharing UV coordinates.
pub fn unreliable_faces(mesh: &TriangleMesh) -> Result<Vec<bool>, BakeError> {
    let uv = mesh.uv.as_ref().ok_or(BakeError::MissingUv)?;
    let nf = mesh.face_count();
    let mut parent: Vec<usize> = (0..uv.coords.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in &uv.faces {
        let a = find(&mut parent, tri[0] as usize);
        for &c in &tri[1..] {
            let b = find(&mut parent, c as usize);
            if a != b {
                parent[b.max(a)] = a.min(b);
            }
        }
    }
    let mut chart = Vec::with_capacity(nf);
    let mut ratio = Vec::with_capacity(nf);
    for f in 0..nf {
        chart.push(find(&mut parent, uv.faces[f][0] as usize));
        let a3 = mesh.face_area(f);
        let a2 = mesh.uv_signed_area(f).unwrap_or(0.0);
        ratio.push(if a3 > 0.0 { a2 / a3 } else { f64::NAN });
    }
    let mut per_chart: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for f in 0..nf {
        if ratio[f].is_finite() && ratio[f] > 0.0 {
            per_chart.entry(chart[f]).or_default().push(ratio[f]);
        }
    }
    let median: std::collections::BTreeMap<usize, f64> = per_chart
        .into_iter()
        .map(|(c, mut v)| {
            v.sort_by(f64::total_cmp);
            (c, v[v.len() / 2])
        })
        .collect();
    Ok((0..nf)
        .map(|f| {
            let a2 = mesh.uv_signed_area(f).unwrap_or(0.0);
            if a2 < 1e-8 {
                return true;
            }
            match median.get(&chart[f]) {
                Some(&m) if ratio[f].is_finite() => ratio[f] > 100.0 * m || ratio[f] * 100.0 < m,
                _ => true,
            }
        })
        .collect())
}

/// Per-texel surface samples of the low-poly mesh. Invalid texels hold zeros.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub resolution: usize,
    pub position: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub tangent: Vec<Vec3>,
    pub bitangent: Vec<Vec3>,
    pub valid: Vec<bool>,
    pub reliable: Vec<bool>,
    /// Covering face, `NO_FACE` when invalid.
    pub face: Vec<u32>,
}

impl GBuffer {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Covering face (`NO_FACE` if none) and barycentrics for every texel whose
/// center lies inside a UV triangle.
pub fn uv_coverage(mesh: &TriangleMesh, resolution: usize) -> Result<(Vec<u32>, Vec<[f64; 3]>), BakeError> {
    let uv = mesh.uv.as_ref().ok_or(BakeError::MissingUv)?;
    let n = resolution;
    let mut face = vec![NO_FACE; n * n];
    let mut bary = vec![[0.0; 3]; n * n];
    let scale = n as f64;
    for (f, tri) in uv.faces.iter().enumerate() {
        let p = tri.map(|i| uv.coords[i as usize] * scale);
        let mut clash = None;
        for_each_covered(p, n, n, |x, y, b| {
            let i = y * n + x;
            if face[i] != NO_FACE {
                clash.get_or_insert((x, y, face[i]));
                return;
            }
            face[i] = f as u32;
            bary[i] = b;
        });
        if let Some((x, y, first)) = clash {
            return Err(BakeError::AtlasOverlap {
                x,
                y,
                first,
                second: f as u32,
            });
        }
    }
    Ok((face, bary))
}

/// Rasterizes the UV layout: a texel is valid when its center is inside a
/// UV triangle.
pub fn rasterize_gbuffer(mesh: &TriangleMesh, resolution: usize) -> Result<GBuffer, BakeError> {
    if resolution == 0 {
        return Err(BakeError::InvalidResolution(resolution));
    }
    if mesh.is_empty() {
        return Err(BakeError::EmptyMesh);
    }
    let n = resolution;
    let (face, bary) = uv_coverage(mesh, resolution)?;
    let frames = TangentFrames::new(mesh)?;
    let unreliable = unreliable_faces(mesh)?;
    let texels: Vec<_> = (0..n * n)
        .into_par_iter()
        .map(|i| {
            let f = face[i];
            if f == NO_FACE {
                return None;
            }
            let b = bary[i];
            let t = mesh.triangle(f as usize);
            let p = t[0] * b[0] + t[1] * b[1] + t[2] * b[2];
            Some((p, frames.frame(f as usize, b), !unreliable[f as usize]))
        })
        .collect();
    let mut g = GBuffer {
        resolution: n,
        position: vec![Vec3::zeros(); n * n],
        normal: vec![Vec3::zeros(); n * n],
        tangent: vec![Vec3::zeros(); n * n],
        bitangent: vec![Vec3::zeros(); n * n],
        valid: vec![false; n * n],
        reliable: vec![false; n * n],
        face,
    };
    for (i, t) in texels.into_iter().enumerate() {
        if let Some((p, [t, b, nn], rel)) = t {
            g.position[i] = p;
            g.tangent[i] = t;
            g.bitangent[i] = b;
            g.normal[i] = nn;
            g.valid[i] = true;
            g.reliable[i] = rel;
        }
    }
    Ok(g)
}

/// RGB8 tangent-space normal map.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub resolution: usize,
    pub data: Vec<[u8; 3]>,
}

impl NormalMap {
    pub fn flat(resolution: usize) -> Self {
        Self {
            resolution,
            data: vec![FLAT; resolution * resolution],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.resolution + x]
    }

    /// Bilinear fetch of the decoded (not renormalized) vector at atlas
    /// coordinate `uv`, clamping at the border.
    pub fn sample(&self, uv: Vec2) -> Vec3 {
        let n = self.resolution;
        let x = uv.x * n as f64 - 0.5;
        let y = uv.y * n as f64 - 0.5;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let clamp = |v: f64| v.clamp(0.0, (n - 1) as f64) as usize;
        let (xa, xb, ya, yb) = (clamp(x0), clamp(x0 + 1.0), clamp(y0), clamp(y0 + 1.0));
        let d = |x, y| decode(self.get(x, y));
        (d(xa, ya) * (1.0 - fx) + d(xb, ya) * fx) * (1.0 - fy) + (d(xa, yb) * (1.0 - fx) + d(xb, yb) * fx) * fy
    }
}

/// `round((n + 1) / 2 × 255)` per channel.
pub fn encode(n: &Vec3) -> [u8; 3] {
    [0, 1, 2].map(|k| (((n[k].clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0).round()) as u8)
}

pub fn decode(c: [u8; 3]) -> Vec3 {
    Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) / 255.0 * 2.0 - Vec3::repeat(1.0)
}

/// Smooth normal of the dense mesh at a surface point.
fn interpolated_normal(normals: &[Vec3], tri: [u32; 3], bary: [f64; 3], fallback: Vec3) -> Vec3 {
    let n = normals[tri[0] as usize] * bary[0] + normals[tri[1] as usize] * bary[1] + normals[tri[2] as usize] * bary[2];
    n.try_normalize(1e-300).unwrap_or(fallback)
}

/// Closest-point transfer of the dense mesh's smooth normals. Texels farther
/// than `max_distance` from the dense surface, unreliable texels, and
/// invalid texels store `(0, 0, 1)`.
pub fn transfer_normals(gbuffer: &GBuffer, highpoly: &TriangleMesh, bvh: &Bvh, max_distance: f64) -> NormalMap {
    let normals = highpoly.smooth_normals();
    let data = (0..gbuffer.valid.len())
        .into_par_iter()
        .map(|i| {
            if !gbuffer.valid[i] || !gbuffer.reliable[i] {
                return FLAT;
            }
            let Some(hit) = bvh.closest_point_within(&gbuffer.position[i], max_distance) else {
                return FLAT;
            };
            let tri = highpoly.faces[hit.face as usize];
            let n = interpolated_normal(&normals, tri, hit.barycentric, highpoly.face_normal(hit.face as usize));
            let ts = Vec3::new(
                n.dot(&gbuffer.tangent[i]),
                n.dot(&gbuffer.bitangent[i]),
                n.dot(&gbuffer.normal[i]),
            );
            ts.try_normalize(1e-300).map_or(FLAT, |v| encode(&v))
        })
        .collect();
    NormalMap {
        resolution: gbuffer.resolution,
        data,
    }
}

/// Push-style dilation of the normal map; see [`dilate`].
pub fn dilate_seams(map: &NormalMap, valid: &[bool], radius: usize) -> NormalMap {
    NormalMap {
        resolution: map.resolution,
        data: dilate(&map.data, valid, map.resolution, radius),
    }
}

/// Push-style dilation over a square `n × n` raster: each pass fills
/// invalid texels from their 8 neighbours filled in earlier passes, so after
/// `radius` passes every texel within Chebyshev distance `radius` of a valid
/// texel holds the value of the nearest (Euclidean, then lowest index) valid
/// source reached. Valid texels never change.
pub fn dilate<T: Copy>(data: &[T], valid: &[bool], n: usize, radius: usize) -> Vec<T> {
    let mut out = data.to_vec();
    // Source texel of every filled texel.
    let mut source: Vec<u32> = (0..n * n).map(|i| if valid[i] { i as u32 } else { u32::MAX }).collect();
    let mut frontier: Vec<usize> = (0..n * n).filter(|&i| valid[i]).collect();
    for _ in 0..radius {
        let mut candidates: Vec<(usize, u32)> = Vec::new();
        for &i in &frontier {
            let (x, y) = ((i % n) as isize, (i / n) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= n as isize || ny >= n as isize {
                        continue;
                    }
                    let j = ny as usize * n + nx as usize;
                    if source[j] == u32::MAX {
                        candidates.push((j, source[i]));
                    }
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let dist2 = |j: usize, s: u32| {
            let (jx, jy) = ((j % n) as i64, (j / n) as i64);
            let (sx, sy) = ((s as usize % n) as i64, (s as usize / n) as i64);
            (jx - sx).pow(2) + (jy - sy).pow(2)
        };
        candidates.sort_unstable_by_key(|&(j, s)| (j, dist2(j, s), s));
        candidates.dedup_by_key(|c| c.0);
        frontier.clear();
        for (j, s) in candidates {
            source[j] = s;
            out[j] = data[s as usize];
            frontier.push(j);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BakeOutput {
    pub gbuffer: GBuffer,
    /// Dilated map.
    pub map: NormalMap,
}

/// The whole stage: G-buffer, transfer with the distance filter relative to
/// the dense mesh's bounding-box diagonal, then seam dilation.
pub fn bake_normal_map(lowpoly: &TriangleMesh, highpoly: &TriangleMesh, params: &BakeParams) -> Result<BakeOutput, BakeError> {
    let gbuffer = rasterize_gbuffer(lowpoly, params.resolution)?;
    let bvh = Bvh::build(highpoly)?;
    let max_distance = params.max_distance_fraction * highpoly.bounds().diagonal();
    let raw = transfer_normals(&gbuffer, highpoly, &bvh, max_distance);
    let map = dilate_seams(&raw, &gbuffer.valid, params.dilation);
    Ok(BakeOutput { gbuffer, map })
}

/// World-space normal decoded from `map` at a surface point of the low-poly
/// mesh.
pub fn decode_world_normal(map: &NormalMap, frames: &TangentFrames, mesh: &TriangleMesh, face: usize, bary: [f64; 3]) -> Result<Vec3, BakeError> {
    let uv = mesh.uv.as_ref().ok_or(BakeError::MissingUv)?;
    let t = uv.faces[face];
    let st = uv.coords[t[0] as usize] * bary[0] + uv.coords[t[1] as usize] * bary[1] + uv.coords[t[2] as usize] * bary[2];
    let ts = map.sample(st);
    let [tt, b, n] = frames.frame(face, bary);
    Ok((tt * ts.x + b * ts.y + n * ts.z).try_normalize(1e-300).unwrap_or(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::UvLayer;

    fn quad() -> TriangleMesh {
        let mut m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        m.uv = Some(UvLayer {
            coords: m.positions.iter().map(|p| Vec2::new(p.x, p.y)).collect(),
            faces: m.faces.clone(),
        });
        m
    }

    #[test]
    fn encoding_round_trips_within_a_step() {
        assert_eq!(encode(&Vec3::z()), FLAT);
        let v = Vec3::new(0.3, -0.5, 0.81).normalize();
        assert!((decode(encode(&v)) - v).amax() <= 1.0 / 255.0 + 1e-12);
    }

    #[test]
    fn identity_quad_positions_are_affine() {
        let g = rasterize_gbuffer(&quad(), 16).unwrap();
        assert_eq!(g.valid_count(), 256);
        for y in 0..16 {
            for x in 0..16 {
                let p = g.position[y * 16 + x];
                let c = Vec2::new((x as f64 + 0.5) / 16.0, (y as f64 + 0.5) / 16.0);
                assert!((p.x - c.x).abs() < 1e-12 && (p.y - c.y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frames_are_right_handed_orthonormal() {
        let g = rasterize_gbuffer(&quad(), 8).unwrap();
        for i in 0..64 {
            let (t, b, n) = (g.tangent[i], g.bitangent[i], g.normal[i]);
            assert!((t.norm() - 1.0).abs() < 1e-9 && t.dot(&n).abs() < 1e-9);
            assert!((t.cross(&b) - n).norm() < 1e-9);
            assert!((t - Vec3::x()).norm() < 1e-9);
        }
    }

    #[test]
    fn overlapping_uv_triangles_are_rejected() {
        let mut m = quad();
        m.uv.as_mut().unwrap().faces[1] = [0, 1, 2];
        assert!(matches!(rasterize_gbuffer(&m, 8), Err(BakeError::AtlasOverlap { .. })));
    }

    #[test]
    fn self_bake_is_flat() {
        let q = quad();
        let out = bake_normal_map(&q, &q, &BakeParams { resolution: 32, ..Default::default() }).unwrap();
        assert!(out.map.data.iter().all(|&c| c == FLAT));
    }

    #[test]
    fn far_texels_get_the_flat_normal() {
        let q = quad();
        let mut hi = q.clone();
        for p in hi.positions.iter_mut() {
            p.z = 0.05 * 1.5f64.sqrt();
        }
        // Slanted dense mesh, well beyond 1% of its diagonal.
        hi.positions[0].z = 0.5;
        let g = rasterize_gbuffer(&q, 16).unwrap();
        let bvh = Bvh::build(&hi).unwrap();
        let map = transfer_normals(&g, &hi, &bvh, 0.01 * hi.bounds().diagonal());
        assert!(map.data.iter().all(|&c| c == FLAT));
    }

    #[test]
    fn dilation_radius_zero_is_identity() {
        let mut m = NormalMap::flat(6);
        m.data[7] = [1, 2, 3];
        let mut valid = vec![false; 36];
        valid[7] = true;
        assert_eq!(dilate_seams(&m, &valid, 0), m);
    }

    #[test]
    fn single_texel_dilates_to_a_square() {
        let mut m = NormalMap::flat(9);
        m.data[4 * 9 + 4] = [10, 20, 30];
        let mut valid = vec![false; 81];
        valid[4 * 9 + 4] = true;
        let d = dilate_seams(&m, &valid, 2);
        for y in 0..9usize {
            for x in 0..9usize {
                let inside = x.abs_diff(4) <= 2 && y.abs_diff(4) <= 2;
                assert_eq!(d.get(x, y) == [10, 20, 30], inside, "({x}, {y})");
            }
        }
    }

    #[test]
    fn degenerate_uv_faces_are_unreliable() {
        let mut m = quad();
        let uv = m.uv.as_mut().unwrap();
        uv.coords.push(Vec2::new(0.5, 0.5));
        uv.coords.push(Vec2::new(0.5, 0.5 + 1e-6));
        uv.coords.push(Vec2::new(0.5 + 1e-6, 0.5));
        uv.faces[1] = [4, 6, 5];
        let u = unreliable_faces(&m).unwrap();
        assert_eq!(u, vec![false, true]);
    }
}
