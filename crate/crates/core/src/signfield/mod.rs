//! Watertight conversion by flood-fill sign estimation.
//!
//! Raw meshes with holes, slits, and inconsistent winding are voxelized into
//! a narrow unsigned-distance band. The band is dilated to seal small gaps,
//! the exterior is flooded from the grid boundary, small interior pockets
//! created by the dilation are reopened, and every undetermined voxel is then
//! labeled by iterative neighbour majority. Because the inside and outside
//! fronts advance one voxel per iteration, they meet near the original
//! surface, which keeps boundary detail that an erosion pass would lose.
//! The resulting signed field is meshed with marching cubes.

pub mod marching_cubes;

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::spatial::{Bvh, SpatialError};
use crate::Vec3;

/// Closed, consistently oriented 2-manifold produced by [`extract_watertight`].
pub type WatertightMesh = TriangleMesh;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignError {
    #[error("mesh does not fit inside the grid with {margin} voxels of margin")]
    OutOfBounds { margin: usize },
    #[error("signed field has no zero crossing")]
    EmptySurface,
    #[error("invalid grid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum VoxelLabel {
    SurfaceBand,
    DilatedBand,
    Exterior,
    Interior,
    Unknown,
}

/// Voxel lattice placement. Voxel `(x, y, z)` is centered at
/// `origin + (x, y, z) * voxel_size`; storage is x-fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: [usize; 3],
    pub origin: Vec3,
    pub voxel_size: f64,
}

impl GridSpec {
    /// Cubic grid of `resolution^3` voxels around the mesh bounds, leaving
    /// `margin` voxels between the bounds and the outermost voxel centers.
    pub fn fit(mesh: &TriangleMesh, resolution: usize, margin: usize) -> Result<GridSpec, SignError> {
        if resolution < 2 * margin + 2 {
            return Err(SignError::InvalidParams(format!(
                "resolution {resolution} too small for margin {margin}"
            )));
        }
        let b = mesh.bounds();
        let extent = b.extent().max().max(1e-9);
        let voxel_size = extent / (resolution - 1 - 2 * margin) as f64;
        let half = (resolution - 1) as f64 * 0.5 * voxel_size;
        Ok(GridSpec {
            resolution: [resolution; 3],
            origin: b.center() - Vec3::repeat(half),
            voxel_size,
        })
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution[0] * (y + self.resolution[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    #[inline]
    pub fn center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64, y as f64, z as f64) * self.voxel_size
    }

    /// Whether every point lies at least `margin` voxels inside the lattice.
    fn encloses(&self, mesh: &TriangleMesh, margin: usize) -> bool {
        let b = mesh.bounds();
        let lo = self.origin + Vec3::repeat(margin as f64 * self.voxel_size);
        let hi = self.origin
            + Vec3::new(
                (self.resolution[0] - 1 - margin) as f64,
                (self.resolution[1] - 1 - margin) as f64,
                (self.resolution[2] - 1 - margin) as f64,
            ) * self.voxel_size;
        let tol = 1e-9 * self.voxel_size;
        (0..3).all(|i| b.min[i] >= lo[i] - tol && b.max[i] <= hi[i] + tol)
    }

    /// Indices of the 6-neighbours of voxel `i`.
    #[inline]
    fn neighbors6(&self, i: usize, out: &mut [usize; 6]) -> usize {
        let [nx, ny, nz] = self.resolution;
        let [x, y, z] = self.coords(i);
        let mut n = 0;
        let stride_y = nx;
        let stride_z = nx * ny;
        if x > 0 {
            out[n] = i - 1;
            n += 1;
        }
        if x + 1 < nx {
            out[n] = i + 1;
            n += 1;
        }
        if y > 0 {
            out[n] = i - stride_y;
            n += 1;
        }
        if y + 1 < ny {
            out[n] = i + stride_y;
            n += 1;
        }
        if z > 0 {
            out[n] = i - stride_z;
            n += 1;
        }
        if z + 1 < nz {
            out[n] = i + stride_z;
            n += 1;
        }
        n
    }

    fn on_boundary(&self, i: usize) -> bool {
        let [x, y, z] = self.coords(i);
        let [nx, ny, nz] = self.resolution;
        x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz
    }
}

/// Counters describing how labels were assigned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SignDiagnostics {
    pub reopened_components: usize,
    pub reopened_voxels: usize,
    pub vote_iterations: usize,
    /// Voxels with no labeled neighbour reachable, resolved as exterior.
    pub unresolved_fallback: usize,
}

#[derive(Debug, Clone)]
pub struct SignGrid {
    pub spec: GridSpec,
    pub labels: Vec<VoxelLabel>,
    /// Unsigned distance to the input surface, saturated at `truncation`.
    pub distance: Vec<f32>,
    pub truncation: f64,
    pub diagnostics: SignDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignParams {
    pub resolution: usize,
    /// Band threshold in voxels.
    pub band_voxels: f64,
    pub dilate_radius: usize,
    pub cavity_fraction: f64,
}

impl Default for SignParams {
    fn default() -> Self {
        Self {
            resolution: 128,
            band_voxels: 1.0,
            dilate_radius: 2,
            cavity_fraction: 0.01,
        }
    }
}

impl SignGrid {
    pub fn count(&self, label: VoxelLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Signed value per voxel: distance, negated for interior voxels. Only
    /// meaningful once every voxel is exterior or interior.
    pub fn signed_values(&self) -> Vec<f32> {
        self.labels
            .iter()
            .zip(&self.distance)
            .map(|(l, &d)| if *l == VoxelLabel::Interior { -d } else { d })
            .collect()
    }

    /// Trilinear interpolation of the signed field; points outside the
    /// lattice read as exterior.
    pub fn signed_at(&self, p: &Vec3) -> f64 {
        let g = (p - self.spec.origin) / self.spec.voxel_size;
        let [nx, ny, nz] = self.spec.resolution;
        if (0..3).any(|i| g[i] < 0.0 || g[i] > (self.spec.resolution[i] - 1) as f64) {
            return self.truncation;
        }
        let x0 = (g.x.floor() as usize).min(nx - 2);
        let y0 = (g.y.floor() as usize).min(ny - 2);
        let z0 = (g.z.floor() as usize).min(nz - 2);
        let (fx, fy, fz) = (g.x - x0 as f64, g.y - y0 as f64, g.z - z0 as f64);
        let mut acc = 0.0;
        for c in 0..8 {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let i = self.spec.index(x0 + dx, y0 + dy, z0 + dz);
            let d = self.distance[i] as f64;
            let v = if self.labels[i] == VoxelLabel::Interior { -d } else { d };
            let w = (if dx == 1 { fx } else { 1.0 - fx })
                * (if dy == 1 { fy } else { 1.0 - fy })
                * (if dz == 1 { fz } else { 1.0 - fz });
            acc += w * v;
        }
        acc
    }
}

/// Labels voxels whose center lies closer than `band_threshold` (world units)
/// to the surface; everything else starts as unknown.
pub fn mark_surface_band(
    mesh: &TriangleMesh,
    spec: GridSpec,
    band_threshold: f64,
) -> Result<SignGrid, SignError> {
    if !spec.encloses(mesh, 2) {
        return Err(SignError::OutOfBounds { margin: 2 });
    }
    let bvh = Bvh::build(mesh)?;
    let truncation = band_threshold.max(0.0) + 6.0 * spec.voxel_size;
    let [nx, ny, _] = spec.resolution;
    let slab = nx * ny;
    let mut distance = vec![0f32; spec.len()];
    let mut labels = vec![VoxelLabel::Unknown; spec.len()];
    distance
        .par_chunks_mut(slab)
        .zip(labels.par_chunks_mut(slab))
        .enumerate()
        .for_each(|(z, (dchunk, lchunk))| {
            for y in 0..ny {
                for x in 0..nx {
                    let c = spec.center(x, y, z);
                    let d = bvh
                        .closest_point_within(&c, truncation)
                        .map_or(truncation, |sp| sp.distance);
                    dchunk[x + nx * y] = d as f32;
                    if d < band_threshold {
                        lchunk[x + nx * y] = VoxelLabel::SurfaceBand;
                    }
                }
            }
        });
    Ok(SignGrid {
        spec,
        labels,
        distance,
        truncation,
        diagnostics: SignDiagnostics::default(),
    })
}

/// Chebyshev (26-neighbourhood) dilation of the surface band by `radius`
/// voxels; newly covered voxels become [`VoxelLabel::DilatedBand`].
pub fn dilate_band(grid: &SignGrid, radius: usize) -> SignGrid {
    let mut out = grid.clone();
    if radius == 0 {
        return out;
    }
    let spec = grid.spec;
    let mut mask: Vec<bool> = grid.labels.iter().map(|&l| l == VoxelLabel::SurfaceBand).collect();
    // A Chebyshev ball is a cube, so the dilation separates into three 1-D passes.
    for axis in 0..3 {
        mask = dilate_axis(&spec, &mask, axis, radius);
    }
    for (l, m) in out.labels.iter_mut().zip(&mask) {
        if *m && *l != VoxelLabel::SurfaceBand {
            *l = VoxelLabel::DilatedBand;
        }
    }
    out
}

fn dilate_axis(spec: &GridSpec, mask: &[bool], axis: usize, radius: usize) -> Vec<bool> {
    let [nx, ny, nz] = spec.resolution;
    let n_axis = spec.resolution[axis];
    let stride = [1, nx, nx * ny][axis];
    let mut out = vec![false; mask.len()];
    let mut line_start = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let c = [x, y, z];
                if c[axis] == 0 {
                    line_start.push(spec.index(x, y, z));
                }
            }
        }
    }
    let mut last = vec![usize::MAX; n_axis];
    for &s in &line_start {
        // Distance to the nearest set voxel along the line, both directions.
        let mut prev: Option<usize> = None;
        for k in 0..n_axis {
            if mask[s + k * stride] {
                prev = Some(k);
            }
            last[k] = prev.map_or(usize::MAX, |p| k - p);
        }
        let mut next: Option<usize> = None;
        for k in (0..n_axis).rev() {
            if mask[s + k * stride] {
                next = Some(k);
            }
            let d = next.map_or(usize::MAX, |p| p - k).min(last[k]);
            out[s + k * stride] = d <= radius;
        }
    }
    out
}

/// Floods unknown voxels 6-connected to the grid boundary as exterior; the
/// unknown voxels left dry become interior. Band voxels keep their labels.
pub fn flood_fill_exterior(grid: &SignGrid) -> SignGrid {
    let mut out = grid.clone();
    let spec = grid.spec;
    let mut queue = VecDeque::new();
    for i in 0..spec.len() {
        if spec.on_boundary(i) && out.labels[i] == VoxelLabel::Unknown {
            out.labels[i] = VoxelLabel::Exterior;
            queue.push_back(i);
        }
    }
    let mut nb = [0usize; 6];
    while let Some(i) = queue.pop_front() {
        let n = spec.neighbors6(i, &mut nb);
        for &j in &nb[..n] {
            if out.labels[j] == VoxelLabel::Unknown {
                out.labels[j] = VoxelLabel::Exterior;
                queue.push_back(j);
            }
        }
    }
    for l in &mut out.labels {
        if *l == VoxelLabel::Unknown {
            *l = VoxelLabel::Interior;
        }
    }
    out
}

/// 6-connected components of voxels with `label`, as sorted index lists,
/// ordered by their smallest voxel index.
fn components(grid: &SignGrid, label: VoxelLabel) -> Vec<Vec<usize>> {
    let spec = grid.spec;
    let mut seen = vec![false; spec.len()];
    let mut out = Vec::new();
    let mut nb = [0usize; 6];
    for start in 0..spec.len() {
        if seen[start] || grid.labels[start] != label {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut head = 0;
        while head < comp.len() {
            let i = comp[head];
            head += 1;
            let n = spec.neighbors6(i, &mut nb);
            for &j in &nb[..n] {
                if !seen[j] && grid.labels[j] == label {
                    seen[j] = true;
                    comp.push(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Returns interior components smaller than `max_fraction` of all interior
/// voxels to the unknown set.
pub fn reopen_small_cavities(grid: &SignGrid, max_fraction: f64) -> SignGrid {
    let mut out = grid.clone();
    let comps = components(grid, VoxelLabel::Interior);
    let total: usize = comps.iter().map(Vec::len).sum();
    let limit = max_fraction * total as f64;
    for comp in comps {
        if (comp.len() as f64) < limit {
            out.diagnostics.reopened_components += 1;
            out.diagnostics.reopened_voxels += comp.len();
            for i in comp {
                out.labels[i] = VoxelLabel::Unknown;
            }
        }
    }
    out
}

/// Assigns every band and unknown voxel by synchronous majority vote over
/// its already-labeled 6-neighbours, repeated until nothing changes. Ties go
/// to exterior; voxels never reached by a labeled neighbour fall back to
/// exterior and are counted in the diagnostics.
pub fn resolve_undetermined(grid: &SignGrid) -> SignGrid {
    let mut out = grid.clone();
    let spec = grid.spec;
    let mut pending: Vec<usize> = (0..spec.len())
        .filter(|&i| !matches!(out.labels[i], VoxelLabel::Exterior | VoxelLabel::Interior))
        .collect();
    let mut nb = [0usize; 6];
    let mut updates: Vec<(usize, VoxelLabel)> = Vec::new();
    let mut iterations = 0;
    while !pending.is_empty() {
        updates.clear();
        for &i in &pending {
            let n = spec.neighbors6(i, &mut nb);
            let (mut ext, mut int) = (0, 0);
            for &j in &nb[..n] {
                match out.labels[j] {
                    VoxelLabel::Exterior => ext += 1,
                    VoxelLabel::Interior => int += 1,
                    _ => {}
                }
            }
            if ext + int > 0 {
                let l = if int > ext {
                    VoxelLabel::Interior
                } else {
                    VoxelLabel::Exterior
                };
                updates.push((i, l));
            }
        }
        if updates.is_empty() {
            break;
        }
        iterations += 1;
        for &(i, l) in &updates {
            out.labels[i] = l;
        }
        pending.retain(|&i| !matches!(out.labels[i], VoxelLabel::Exterior | VoxelLabel::Interior));
    }
    out.diagnostics.vote_iterations = iterations;
    out.diagnostics.unresolved_fallback = pending.len();
    for i in pending {
        out.labels[i] = VoxelLabel::Exterior;
    }
    out
}

/// Marching-cubes surface of the fully signed grid at level `iso`.
pub fn extract_watertight(grid: &SignGrid, iso: f64) -> Result<WatertightMesh, SignError> {
    let values = grid.signed_values();
    let iso = iso as f32;
    let any_in = values.iter().any(|&v| v < iso);
    let any_out = values.iter().any(|&v| v >= iso);
    if !any_in || !any_out {
        return Err(SignError::EmptySurface);
    }
    let sg = marching_cubes::ScalarGrid {
        dims: grid.spec.resolution,
        origin: grid.spec.origin,
        spacing: grid.spec.voxel_size,
        values: &values,
    };
    Ok(marching_cubes::extract(&sg, iso))
}

/// Output of the full watertight conversion.
#[derive(Debug, Clone)]
pub struct WatertightResult {
    pub mesh: WatertightMesh,
    pub grid: SignGrid,
}

/// Runs band marking, dilation, flood fill, cavity reopening, vote
/// resolution, and marching cubes.
pub fn make_watertight(mesh: &TriangleMesh, params: &SignParams) -> Result<WatertightResult, SignError> {
    let margin = params.dilate_radius + params.band_voxels.ceil() as usize + 3;
    let spec = GridSpec::fit(mesh, params.resolution, margin)?;
    let grid = mark_surface_band(mesh, spec, params.band_voxels * spec.voxel_size)?;
    let grid = dilate_band(&grid, params.dilate_radius);
    let grid = flood_fill_exterior(&grid);
    let grid = reopen_small_cavities(&grid, params.cavity_fraction);
    let grid = resolve_undetermined(&grid);
    let mesh = extract_watertight(&grid, 0.0)?;
    Ok(WatertightResult { mesh, grid })
}

/// Signed distance queries: magnitude from the closest point on the
/// watertight surface, sign from the resolved grid.
pub struct SdfSampler<'a> {
    bvh: Bvh,
    grid: &'a SignGrid,
}

impl<'a> SdfSampler<'a> {
    pub fn new(surface: &WatertightMesh, grid: &'a SignGrid) -> Result<Self, SignError> {
        Ok(Self {
            bvh: Bvh::build(surface)?,
            grid,
        })
    }

    pub fn sample(&self, p: &Vec3) -> f64 {
        let d = self.bvh.closest_point(p).distance;
        if self.grid.signed_at(p) < 0.0 {
            -d
        } else {
            d
        }
    }

    pub fn sample_many(&self, points: &[Vec3]) -> Vec<f64> {
        points.par_iter().map(|p| self.sample(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn sphere_grid(res: usize, threshold_voxels: f64) -> (TriangleMesh, SignGrid) {
        let mesh = fixtures::icosphere(4);
        let spec = GridSpec::fit(&mesh, res, 6).unwrap();
        let g = mark_surface_band(&mesh, spec, threshold_voxels * spec.voxel_size).unwrap();
        (mesh, g)
    }

    #[test]
    fn band_is_thin_spherical_shell() {
        let (_, g) = sphere_grid(64, 1.0);
        let h = g.spec.voxel_size;
        for i in 0..g.spec.len() {
            let [x, y, z] = g.spec.coords(i);
            let r = g.spec.center(x, y, z).norm();
            // Faceting of the level-4 icosphere stays well below a voxel.
            if g.labels[i] == VoxelLabel::SurfaceBand {
                assert!((r - 1.0).abs() < 1.0 * h + 0.01);
            } else if (r - 1.0).abs() < 0.5 * h {
                panic!("voxel at |r-1| < h/2 not in band");
            }
        }
    }

    #[test]
    fn zero_threshold_gives_empty_band() {
        let (_, g) = sphere_grid(32, 0.0);
        assert_eq!(g.count(VoxelLabel::SurfaceBand), 0);
    }

    #[test]
    fn plane_band_is_slab() {
        let mut plane = fixtures::plane_grid(4);
        for p in &mut plane.positions {
            p.z = 0.5;
        }
        let spec = GridSpec {
            resolution: [16; 3],
            origin: Vec3::new(-0.2, -0.2, 0.0) - Vec3::repeat(0.0),
            voxel_size: 0.1,
        };
        let g = mark_surface_band(&plane, spec, 0.1).unwrap();
        for i in 0..spec.len() {
            let [x, y, z] = spec.coords(i);
            let c = spec.center(x, y, z);
            let inside_xy = (0.0..=1.0).contains(&c.x) && (0.0..=1.0).contains(&c.y);
            let dz = (c.z - 0.5).abs();
            let expect = dz < 0.1;
            if inside_xy && (dz - 0.1).abs() > 1e-9 {
                assert_eq!(g.labels[i] == VoxelLabel::SurfaceBand, expect, "{c:?}");
            }
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let mesh = fixtures::icosphere(1);
        let spec = GridSpec {
            resolution: [8; 3],
            origin: Vec3::zeros(),
            voxel_size: 0.1,
        };
        assert!(matches!(
            mark_surface_band(&mesh, spec, 0.1),
            Err(SignError::OutOfBounds { .. })
        ));
    }

    fn empty_grid(n: usize) -> SignGrid {
        let spec = GridSpec {
            resolution: [n; 3],
            origin: Vec3::zeros(),
            voxel_size: 1.0,
        };
        SignGrid {
            spec,
            labels: vec![VoxelLabel::Unknown; spec.len()],
            distance: vec![10.0; spec.len()],
            truncation: 10.0,
            diagnostics: SignDiagnostics::default(),
        }
    }

    #[test]
    fn dilation_kernel() {
        let mut g = empty_grid(7);
        let c = g.spec.index(3, 3, 3);
        g.labels[c] = VoxelLabel::SurfaceBand;
        assert_eq!(dilate_band(&g, 0).count(VoxelLabel::DilatedBand), 0);
        let d = dilate_band(&g, 1);
        assert_eq!(d.count(VoxelLabel::DilatedBand), 26);
        assert_eq!(d.count(VoxelLabel::SurfaceBand), 1);
        assert_eq!(dilate_band(&g, 2).count(VoxelLabel::DilatedBand), 124);
    }

    #[test]
    fn empty_grid_floods_everything() {
        let g = flood_fill_exterior(&empty_grid(6));
        assert_eq!(g.count(VoxelLabel::Exterior), 216);
    }

    #[test]
    fn majority_and_tie_break() {
        // Center voxel with 4 exterior and 1 interior labeled neighbours.
        let mut g = empty_grid(3);
        for l in &mut g.labels {
            *l = VoxelLabel::Exterior;
        }
        let c = g.spec.index(1, 1, 1);
        g.labels[c] = VoxelLabel::DilatedBand;
        g.labels[g.spec.index(1, 1, 0)] = VoxelLabel::Interior;
        g.labels[g.spec.index(1, 1, 2)] = VoxelLabel::SurfaceBand;
        let r = resolve_undetermined(&g);
        assert_eq!(r.labels[c], VoxelLabel::Exterior);

        // Exact tie: 3 interior, 3 exterior.
        let mut g = empty_grid(3);
        for l in &mut g.labels {
            *l = VoxelLabel::Exterior;
        }
        g.labels[c] = VoxelLabel::DilatedBand;
        for (x, y, z) in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
            g.labels[g.spec.index(x, y, z)] = VoxelLabel::Interior;
        }
        assert_eq!(resolve_undetermined(&g).labels[c], VoxelLabel::Exterior);
    }

    #[test]
    fn isolated_region_fails_open() {
        let g = empty_grid(3);
        let r = resolve_undetermined(&g);
        assert_eq!(r.count(VoxelLabel::Exterior), 27);
        assert_eq!(r.diagnostics.unresolved_fallback, 27);
    }

    #[test]
    fn cavity_threshold_zero_is_identity() {
        let mut g = empty_grid(5);
        g.labels[g.spec.index(2, 2, 2)] = VoxelLabel::Interior;
        let r = reopen_small_cavities(&g, 0.0);
        assert_eq!(r.labels, g.labels);
        let r = reopen_small_cavities(&g, 0.5);
        assert_eq!(r.labels, g.labels, "single component is never below half of itself");
    }

    #[test]
    fn all_positive_grid_has_no_surface() {
        let mut g = empty_grid(4);
        for l in &mut g.labels {
            *l = VoxelLabel::Exterior;
        }
        assert_eq!(extract_watertight(&g, 0.0).unwrap_err(), SignError::EmptySurface);
    }
}
