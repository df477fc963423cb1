//! Evaluation metrics for simplification and baking.
//!
//! Distances are point-to-surface: area-weighted samples on one mesh are
//! queried against the other mesh's BVH. By default both meshes are first
//! scaled into the unit cube with one shared transform, so values are
//! comparable across assets.
//!
//! Sample `i` of a run draws its random numbers from a ChaCha8 stream seeked
//! to word `8 i`, so results do not depend on how work is split across
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bake::{decode_world_normal, unreliable_faces, BakeError, NormalMap, TangentFrames};
use crate::mesh::{Aabb, TriangleMesh};
use crate::render::rasterize;
use crate::spatial::{Bvh, SpatialError};
use crate::visibility::view_cameras;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{0} mesh has no faces with positive area")]
    EmptyMesh(&'static str),
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Bake(#[from] BakeError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// Surface samples per direction for Chamfer and Hausdorff.
    pub samples: usize,
    /// Samples for the angular errors.
    pub angular_samples: usize,
    pub seed: u64,
    /// Scale both meshes into the unit cube before measuring distances.
    pub normalize: bool,
    pub flip_views: usize,
    pub flip_resolution: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            samples: 256_000,
            angular_samples: 10_000,
            seed: 7,
            normalize: true,
            flip_views: 24,
            flip_resolution: 1024,
        }
    }
}

/// Everything the `metrics` subcommand reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    /// Flipped-normal pixels of mesh A, if rendered.
    pub flipped_pixels: Option<u64>,
    /// Degrees; present when a normal map was supplied.
    pub baked_mean_deg: Option<f64>,
    pub geo_mean_deg: f64,
    pub samples: usize,
    pub angular_samples: usize,
    /// Angular samples dropped because they fell on unreliable faces.
    pub excluded_samples: usize,
    pub seed: u64,
    pub normalized: bool,
}

/// Area-weighted uniform sampler over a mesh surface.
#[derive(Debug, Clone)]
pub struct SurfaceSampler<'a> {
    mesh: &'a TriangleMesh,
    /// Cumulative face areas.
    cdf: Vec<f64>,
}

/// A point on a mesh surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub face: usize,
    pub bary: [f64; 3],
    pub position: Vec3,
}

impl<'a> SurfaceSampler<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Option<Self> {
        let mut total = 0.0;
        let cdf: Vec<f64> = (0..mesh.face_count())
            .map(|f| {
                total += mesh.face_area(f);
                total
            })
            .collect();
        (total > 0.0 && total.is_finite()).then_some(Self { mesh, cdf })
    }

    /// Sample `index` of the stream `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> SurfaceSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(8 * index as u128);
        let total = *self.cdf.last().expect("non-empty");
        let pick = rng.random::<f64>() * total;
        let face = self.cdf.partition_point(|&c| c <= pick).min(self.cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let t = self.mesh.triangle(face);
        SurfaceSample {
            face,
            bary,
            position: t[0] * bary[0] + t[1] * bary[1] + t[2] * bary[2],
        }
    }
}

/// Shared transform that puts the union of both boxes into the unit cube.
fn unit_cube_pair(a: &TriangleMesh, b: &TriangleMesh) -> (TriangleMesh, TriangleMesh) {
    let bounds: Aabb = a.bounds().union(&b.bounds());
    let ext = bounds.extent().max();
    let scale = if ext > 0.0 { 1.0 / ext } else { 1.0 };
    let (mut a, mut b) = (a.clone(), b.clone());
    a.transform(bounds.min, scale);
    b.transform(bounds.min, scale);
    (a, b)
}

/// Mean and max distance from samples on `from` to the surface of `to`.
fn directed(from: &TriangleMesh, to: &Bvh, samples: usize, seed: u64) -> Result<(f64, f64), MetricsError> {
    let sampler = SurfaceSampler::new(from).ok_or(MetricsError::EmptyMesh("source"))?;
    let d: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| to.closest_point(&sampler.sample(seed, i).position).distance)
        .collect();
    // fixed summation order keeps the result independent of thread count
    let sum: f64 = d.iter().sum();
    Ok((sum / samples as f64, d.iter().copied().fold(0.0, f64::max)))
}

/// `(chamfer, hausdorff)` in one pass. Chamfer is the mean of the two
/// directed mean distances; Hausdorff the larger directed maximum.
pub fn distances(a: &TriangleMesh, b: &TriangleMesh, params: &MetricParams) -> Result<(f64, f64), MetricsError> {
    if params.samples == 0 {
        return Err(MetricsError::NoSamples);
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyMesh("first"));
    }
    if b.is_empty() {
        return Err(MetricsError::EmptyMesh("second"));
    }
    let normalized;
    let (a, b) = if params.normalize {
        normalized = unit_cube_pair(a, b);
        (&normalized.0, &normalized.1)
    } else {
        (a, b)
    };
    let (bvh_a, bvh_b) = (Bvh::build(a)?, Bvh::build(b)?);
    // same stream in both directions so that swapping the meshes is bit-exact
    let (mean_ab, max_ab) = directed(a, &bvh_b, params.samples, params.seed)?;
    let (mean_ba, max_ba) = directed(b, &bvh_a, params.samples, params.seed)?;
    Ok((0.5 * (mean_ab + mean_ba), max_ab.max(max_ba)))
}

pub fn chamfer(a: &TriangleMesh, b: &TriangleMesh, params: &MetricParams) -> Result<f64, MetricsError> {
    Ok(distances(a, b, params)?.0)
}

pub fn hausdorff(a: &TriangleMesh, b: &TriangleMesh, params: &MetricParams) -> Result<f64, MetricsError> {
    Ok(distances(a, b, params)?.1)
}

/// Pixels where renders with and without backface culling show different
/// faces, summed over `views` cameras spread over the bounding sphere.
/// Comparing face ids rather than coverage also catches inverted closed
/// meshes, whose culled render shows the far side with the same silhouette.
pub fn flipped_normals(mesh: &TriangleMesh, views: usize, resolution: usize) -> u64 {
    if mesh.is_empty() {
        return 0;
    }
    view_cameras(mesh, views, resolution)
        .par_iter()
        .map(|cam| {
            let all = rasterize(mesh, cam, false);
            let front = rasterize(mesh, cam, true);
            all.face.iter().zip(&front.face).filter(|(a, b)| a != b).count() as u64
        })
        .sum()
}

/// Mean angle in degrees and number of excluded samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularError {
    pub mean_deg: f64,
    pub used: usize,
    pub excluded: usize,
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn interpolate(normals: &[Vec3], tri: [u32; 3], bary: [f64; 3]) -> Vec3 {
    let n: Vec3 = (0..3).map(|c| normals[tri[c] as usize] * bary[c]).sum();
    n.try_normalize(1e-300).unwrap_or_else(Vec3::z)
}

/// Shared loop of the two angular metrics: `normal_at` gives the estimate
/// for a low-poly sample, or `None` to exclude it.
fn angular<F>(lowpoly: &TriangleMesh, highpoly: &TriangleMesh, samples: usize, seed: u64, normal_at: F) -> Result<AngularError, MetricsError>
where
    F: Fn(&SurfaceSample) -> Option<Vec3> + Sync,
{
    if samples == 0 {
        return Err(MetricsError::NoSamples);
    }
    let sampler = SurfaceSampler::new(lowpoly).ok_or(MetricsError::EmptyMesh("low-poly"))?;
    let bvh = Bvh::build(highpoly)?;
    let truth_normals = highpoly.smooth_normals();
    let angles: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = sampler.sample(seed, i);
            let est = normal_at(&s)?;
            let hit = bvh.closest_point(&s.position);
            let truth = interpolate(&truth_normals, highpoly.faces[hit.face as usize], hit.barycentric);
            Some(angle_deg(&est, &truth))
        })
        .collect();
    let used: Vec<f64> = angles.iter().flatten().copied().collect();
    let mean = if used.is_empty() { 0.0 } else { used.iter().sum::<f64>() / used.len() as f64 };
    Ok(AngularError {
        mean_deg: mean,
        used: used.len(),
        excluded: samples - used.len(),
    })
}

/// Angle between the low-poly's interpolated smooth normal and the dense
/// mesh's smooth normal at the closest point.
pub fn geo_mean_error(lowpoly: &TriangleMesh, highpoly: &TriangleMesh, samples: usize, seed: u64) -> Result<AngularError, MetricsError> {
    let normals = lowpoly.smooth_normals();
    angular(lowpoly, highpoly, samples, seed, |s| Some(interpolate(&normals, lowpoly.faces[s.face], s.bary)))
}

/// As [`geo_mean_error`], but the estimate is the baked map decoded through
/// the sample's tangent frame. Samples on unreliable faces are excluded.
pub fn baked_mean_error(lowpoly: &TriangleMesh, map: &NormalMap, highpoly: &TriangleMesh, samples: usize, seed: u64) -> Result<AngularError, MetricsError> {
    let frames = TangentFrames::new(lowpoly)?;
    let unreliable = unreliable_faces(lowpoly)?;
    angular(lowpoly, highpoly, samples, seed, |s| {
        if unreliable[s.face] {
            return None;
        }
        decode_world_normal(map, &frames, lowpoly, s.face, s.bary).ok()
    })
}

/// All metrics of `a` (simplified / low-poly) against `b` (reference).
/// Flipped normals are rendered only when `params.flip_views > 0`.
pub fn evaluate(a: &TriangleMesh, b: &TriangleMesh, map: Option<&NormalMap>, params: &MetricParams) -> Result<MetricReport, MetricsError> {
    let (chamfer, hausdorff) = distances(a, b, params)?;
    let geo = geo_mean_error(a, b, params.angular_samples, params.seed)?;
    let baked = map.map(|m| baked_mean_error(a, m, b, params.angular_samples, params.seed)).transpose()?;
    Ok(MetricReport {
        chamfer,
        hausdorff,
        flipped_pixels: (params.flip_views > 0).then(|| flipped_normals(a, params.flip_views, params.flip_resolution)),
        baked_mean_deg: baked.map(|e| e.mean_deg),
        geo_mean_deg: geo.mean_deg,
        samples: params.samples,
        angular_samples: params.angular_samples,
        excluded_samples: baked.map_or(0, |e| e.excluded),
        seed: params.seed,
        normalized: params.normalize,
    })
}
