//! Indexed triangle mesh shared by every stage of the pipeline.

use crate::{Vec2, Vec3};

/// Per-corner texture coordinates, indexed separately from positions so that
/// a vertex on a UV seam can carry one coordinate per chart.
#[derive(Debug, Clone, PartialEq)]
pub struct UvLayer {
    pub coords: Vec<Vec2>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-position smooth normals.
    pub normals: Option<Vec<Vec3>>,
    pub uv: Option<UvLayer>,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

/// Result of the closed-2-manifold check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifoldReport {
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    /// Edges whose two faces traverse them in the same direction.
    pub inconsistent_edges: usize,
    pub euler_characteristic: i64,
}

impl ManifoldReport {
    pub fn is_closed_manifold(&self) -> bool {
        self.boundary_edges == 0
            && self.nonmanifold_edges == 0
            && self.inconsistent_edges == 0
            && self.euler_characteristic % 2 == 0
            && self.euler_characteristic <= 2
    }
}

impl TriangleMesh {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        Self {
            positions,
            faces,
            normals: None,
            uv: None,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Unnormalized face normal (twice the area vector).
    #[inline]
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_cross(f).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.positions)
    }

    pub fn has_non_finite(&self) -> bool {
        self.positions.iter().any(|p| !p.iter().all(|c| c.is_finite()))
    }

    /// Area-weighted vertex normals computed from the faces.
    pub fn compute_vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.positions.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            for &v in face {
                acc[v as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| n.try_normalize(1e-300).unwrap_or_else(Vec3::z))
            .collect()
    }

    /// Stored normals when present, otherwise area-weighted ones.
    pub fn smooth_normals(&self) -> Vec<Vec3> {
        match &self.normals {
            Some(n) if n.len() == self.positions.len() => n.clone(),
            _ => self.compute_vertex_normals(),
        }
    }

    pub fn with_vertex_normals(mut self) -> Self {
        self.normals = Some(self.compute_vertex_normals());
        self
    }

    /// All undirected edges as `(lo, hi, face)` triples sorted by edge then face.
    pub fn edge_face_list(&self) -> Vec<(u32, u32, u32)> {
        let mut edges = Vec::with_capacity(self.faces.len() * 3);
        for (f, face) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                edges.push((a.min(b), a.max(b), f as u32));
            }
        }
        edges.sort_unstable();
        edges
    }

    /// For each face and each of its edges (`k` spans corner `k` to `k+1`),
    /// the face on the other side when the edge is shared by exactly two faces.
    pub fn face_adjacency(&self) -> Vec<[Option<u32>; 3]> {
        let mut adj = vec![[None; 3]; self.faces.len()];
        let edges = self.edge_face_list();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            if j - i == 2 {
                let (lo, hi, fa) = edges[i];
                let fb = edges[i + 1].2;
                if fa != fb {
                    adj[fa as usize][self.local_edge(fa as usize, lo, hi)] = Some(fb);
                    adj[fb as usize][self.local_edge(fb as usize, lo, hi)] = Some(fa);
                }
            }
            i = j;
        }
        adj
    }

    fn local_edge(&self, f: usize, lo: u32, hi: u32) -> usize {
        let face = self.faces[f];
        (0..3)
            .find(|&k| {
                let a = face[k];
                let b = face[(k + 1) % 3];
                a.min(b) == lo && a.max(b) == hi
            })
            .expect("edge belongs to face")
    }

    pub fn manifold_report(&self) -> ManifoldReport {
        let mut directed: Vec<(u32, u32, u32, u32)> = Vec::with_capacity(self.faces.len() * 3);
        for face in &self.faces {
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                directed.push((a.min(b), a.max(b), a, b));
            }
        }
        directed.sort_unstable();
        let mut report = ManifoldReport {
            boundary_edges: 0,
            nonmanifold_edges: 0,
            inconsistent_edges: 0,
            euler_characteristic: 0,
        };
        let mut edge_count = 0i64;
        let mut i = 0;
        while i < directed.len() {
            let mut j = i + 1;
            while j < directed.len() && directed[j].0 == directed[i].0 && directed[j].1 == directed[i].1 {
                j += 1;
            }
            edge_count += 1;
            match j - i {
                1 => report.boundary_edges += 1,
                2 => {
                    if directed[i].2 == directed[i + 1].2 {
                        report.inconsistent_edges += 1;
                    }
                }
                _ => report.nonmanifold_edges += 1,
            }
            i = j;
        }
        let mut used = vec![false; self.positions.len()];
        for face in &self.faces {
            for &v in face {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        report.euler_characteristic = v - edge_count + self.faces.len() as i64;
        report
    }

    /// Drops vertices not referenced by any face; face order is preserved.
    pub fn compact(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut positions = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for face in &self.faces {
            for &v in face {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = positions.len() as u32;
                    positions.push(self.positions[v as usize]);
                    if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                        out.push(src[v as usize]);
                    }
                }
            }
        }
        let faces = self
            .faces
            .iter()
            .map(|f| [remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]])
            .collect();
        let uv = self.uv.as_ref().map(|layer| {
            let mut remap = vec![u32::MAX; layer.coords.len()];
            let mut coords = Vec::new();
            let faces = layer
                .faces
                .iter()
                .map(|f| {
                    f.map(|t| {
                        if remap[t as usize] == u32::MAX {
                            remap[t as usize] = coords.len() as u32;
                            coords.push(layer.coords[t as usize]);
                        }
                        remap[t as usize]
                    })
                })
                .collect();
            UvLayer { coords, faces }
        });
        TriangleMesh {
            positions,
            faces,
            normals,
            uv,
        }
    }

    /// Keeps only the faces for which `keep` is true (order preserved) and
    /// drops unreferenced vertices.
    pub fn filter_faces(&self, keep: impl Fn(usize) -> bool) -> TriangleMesh {
        let idx: Vec<usize> = (0..self.faces.len()).filter(|&f| keep(f)).collect();
        let sub = TriangleMesh {
            positions: self.positions.clone(),
            faces: idx.iter().map(|&f| self.faces[f]).collect(),
            normals: self.normals.clone(),
            uv: self.uv.as_ref().map(|l| UvLayer {
                coords: l.coords.clone(),
                faces: idx.iter().map(|&f| l.faces[f]).collect(),
            }),
        };
        sub.compact()
    }

    /// Uniformly rescales and recenters so the bounding sphere (about the box
    /// center) has the given radius. Returns `(center, scale)` applied as
    /// `p' = (p - center) * scale`.
    pub fn normalize_to_sphere(&mut self, radius: f64) -> (Vec3, f64) {
        let center = self.bounds().center();
        let r = self
            .positions
            .iter()
            .map(|p| (p - center).norm())
            .fold(0.0, f64::max);
        let scale = if r > 0.0 { radius / r } else { 1.0 };
        for p in &mut self.positions {
            *p = (*p - center) * scale;
        }
        (center, scale)
    }

    /// Uniformly rescales into the unit cube `[0,1]^3` (longest side 1).
    pub fn normalize_to_unit_cube(&mut self) {
        let b = self.bounds();
        let ext = b.extent().max();
        let scale = if ext > 0.0 { 1.0 / ext } else { 1.0 };
        for p in &mut self.positions {
            *p = (*p - b.min) * scale;
        }
    }

    /// Applies `p' = (p - center) * scale` to the positions.
    pub fn transform(&mut self, center: Vec3, scale: f64) {
        for p in &mut self.positions {
            *p = (*p - center) * scale;
        }
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> TriangleMesh {
        let mut out = self.clone();
        for f in &mut out.faces {
            f.swap(1, 2);
        }
        if let Some(l) = out.uv.as_mut() {
            for f in &mut l.faces {
                f.swap(1, 2);
            }
        }
        if let Some(n) = out.normals.as_mut() {
            for v in n {
                *v = -*v;
            }
        }
        out
    }

    /// Concatenates two meshes.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.positions.len() as u32;
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| f.map(|v| v + off)));
        TriangleMesh::new(positions, faces)
    }

    /// UV area of face `f` (signed, counter-clockwise positive).
    pub fn uv_signed_area(&self, f: usize) -> Option<f64> {
        let layer = self.uv.as_ref()?;
        let [a, b, c] = layer.faces[f].map(|i| layer.coords[i as usize]);
        Some(0.5 * cross2(&(b - a), &(c - a)))
    }
}

#[inline]
pub fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cube_is_closed_manifold() {
        let cube = fixtures::cube(1.0);
        let r = cube.manifold_report();
        assert!(r.is_closed_manifold(), "{r:?}");
        assert_eq!(r.euler_characteristic, 2);
    }

    #[test]
    fn flipped_face_is_inconsistent() {
        let mut cube = fixtures::cube(1.0);
        cube.faces[0].swap(1, 2);
        let r = cube.manifold_report();
        assert_eq!(r.inconsistent_edges, 3);
        assert!(!r.is_closed_manifold());
    }

    #[test]
    fn compact_drops_unused_vertices() {
        let mut m = fixtures::cube(1.0);
        m.positions.push(Vec3::new(9.0, 9.0, 9.0));
        let c = m.compact();
        assert_eq!(c.vertex_count(), 8);
        assert_eq!(c.face_count(), 12);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = fixtures::icosphere(2);
        let adj = m.face_adjacency();
        for (f, nbrs) in adj.iter().enumerate() {
            for n in nbrs.iter().flatten() {
                assert!(adj[*n as usize].contains(&Some(f as u32)));
            }
        }
    }
}
