//! Hidden face removal.
//!
//! Faces are first counted by how many orthographic pixel rays from a set of
//! viewpoints on the bounding sphere reach them. Faces that no ray reaches
//! but that connect to a visible face through normal-coherent edges (shadowed
//! concavities of the outer shell) are promoted back; everything else is
//! deleted.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::render::{rasterize, OrthoCamera, NO_FACE};
use crate::spatial::{Bvh, SpatialError};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VisibilityError {
    #[error("every face is hidden")]
    AllHidden,
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mask covers {mask} faces but the mesh has {mesh}")]
    MaskMismatch { mask: usize, mesh: usize },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceVisibility {
    Visible,
    PromotedExterior,
    Hidden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    pub flags: Vec<FaceVisibility>,
    pub hits: Vec<u32>,
}

impl VisibilityMask {
    pub fn count(&self, flag: FaceVisibility) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    pub fn kept(&self, f: usize) -> bool {
        self.flags[f] != FaceVisibility::Hidden
    }
}

/// How pixel rays are resolved against the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RayMethod {
    /// Z-buffer over pixel centers; exact for orthographic rays.
    #[default]
    Raster,
    /// One BVH ray cast per pixel.
    Bvh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityParams {
    pub viewpoints: usize,
    pub resolution: usize,
    pub cos_threshold: f64,
    pub method: RayMethod,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            viewpoints: 64,
            resolution: 512,
            cos_threshold: 0.5,
            method: RayMethod::Raster,
        }
    }
}

impl VisibilityParams {
    /// 512 viewpoints at 1024 pixels.
    pub fn full_scale() -> Self {
        Self {
            viewpoints: 512,
            resolution: 1024,
            ..Self::default()
        }
    }
}

/// `n` directions spread evenly over the unit sphere (golden-angle spiral).
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Cameras on the bounding sphere looking at its center, with images just
/// covering the sphere.
pub fn view_cameras(mesh: &TriangleMesh, viewpoints: usize, resolution: usize) -> Vec<OrthoCamera> {
    let center = mesh.bounds().center();
    let radius = mesh
        .positions
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.001;
    fibonacci_directions(viewpoints)
        .into_iter()
        .map(|d| OrthoCamera::looking(-d, center, radius, resolution))
        .collect()
}

/// Accumulates per-face hit counts over all viewpoints.
pub fn cast_visibility(mesh: &TriangleMesh, params: &VisibilityParams) -> Result<VisibilityMask, VisibilityError> {
    if mesh.is_empty() {
        return Err(VisibilityError::EmptyMesh);
    }
    let cams = view_cameras(mesh, params.viewpoints, params.resolution);
    let fc = mesh.face_count();
    let hits = match params.method {
        RayMethod::Raster => cams
            .par_iter()
            .fold(
                || vec![0u32; fc],
                |mut acc, cam| {
                    for &f in &rasterize(mesh, cam, false).face {
                        if f != NO_FACE {
                            acc[f as usize] += 1;
                        }
                    }
                    acc
                },
            )
            .reduce(|| vec![0u32; fc], add_counts),
        RayMethod::Bvh => {
            // Built once, shared by every view.
            let bvh = Bvh::build(mesh)?;
            cams.par_iter()
                .fold(
                    || vec![0u32; fc],
                    |mut acc, cam| {
                        let back = 2.0 * cam.half_extent;
                        for row in 0..cam.resolution {
                            for col in 0..cam.resolution {
                                let (o, d) = cam.pixel_ray(col, row, back);
                                if let Some(h) = bvh.raycast_first(&o, &d) {
                                    acc[h.face as usize] += 1;
                                }
                            }
                        }
                        acc
                    },
                )
                .reduce(|| vec![0u32; fc], add_counts)
        }
    };
    let flags = hits
        .iter()
        .map(|&h| if h > 0 { FaceVisibility::Visible } else { FaceVisibility::Hidden })
        .collect();
    Ok(VisibilityMask { flags, hits })
}

fn add_counts(mut a: Vec<u32>, b: Vec<u32>) -> Vec<u32> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Faces sharing an edge with each face; non-manifold edges connect every
/// incident pair.
fn edge_neighbors(mesh: &TriangleMesh) -> Vec<Vec<u32>> {
    let list = mesh.edge_face_list();
    let mut adj = vec![Vec::new(); mesh.face_count()];
    let mut i = 0;
    while i < list.len() {
        let mut j = i;
        while j < list.len() && list[j].0 == list[i].0 && list[j].1 == list[i].1 {
            j += 1;
        }
        for a in i..j {
            for b in i..j {
                let (fa, fb) = (list[a].2, list[b].2);
                if fa != fb && !adj[fa as usize].contains(&fb) {
                    adj[fa as usize].push(fb);
                }
            }
        }
        i = j;
    }
    adj
}

/// Breadth-first promotion of hidden faces reachable from visible ones across
/// edges whose two face normals satisfy `dot >= cos_threshold`.
pub fn promote_exterior(mesh: &TriangleMesh, mask: &VisibilityMask, cos_threshold: f64) -> Result<VisibilityMask, VisibilityError> {
    if mask.flags.len() != mesh.face_count() {
        return Err(VisibilityError::MaskMismatch {
            mask: mask.flags.len(),
            mesh: mesh.face_count(),
        });
    }
    let adj = edge_neighbors(mesh);
    let normals: Vec<Vec3> = (0..mesh.face_count()).map(|f| mesh.face_normal(f)).collect();
    let mut out = mask.clone();
    let mut queue: VecDeque<u32> = (0..mesh.face_count() as u32)
        .filter(|&f| mask.flags[f as usize] == FaceVisibility::Visible)
        .collect();
    while let Some(f) = queue.pop_front() {
        for &g in &adj[f as usize] {
            if out.flags[g as usize] != FaceVisibility::Hidden {
                continue;
            }
            if normals[g as usize].dot(&normals[f as usize]) >= cos_threshold {
                out.flags[g as usize] = FaceVisibility::PromotedExterior;
                queue.push_back(g);
            }
        }
    }
    Ok(out)
}

/// Keeps visible and promoted faces in their original order.
pub fn remove_hidden(mesh: &TriangleMesh, mask: &VisibilityMask) -> Result<TriangleMesh, VisibilityError> {
    if mask.flags.len() != mesh.face_count() {
        return Err(VisibilityError::MaskMismatch {
            mask: mask.flags.len(),
            mesh: mesh.face_count(),
        });
    }
    if mask.flags.iter().all(|&f| f == FaceVisibility::Hidden) {
        return Err(VisibilityError::AllHidden);
    }
    Ok(mesh.filter_faces(|f| mask.kept(f)))
}

/// The whole stage: cast, promote, remove.
pub fn cull_hidden(mesh: &TriangleMesh, params: &VisibilityParams) -> Result<(TriangleMesh, VisibilityMask), VisibilityError> {
    let cast = cast_visibility(mesh, params)?;
    let mask = promote_exterior(mesh, &cast, params.cos_threshold)?;
    let out = remove_hidden(mesh, &mask)?;
    Ok((out, mask))
}
