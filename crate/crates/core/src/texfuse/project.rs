//! View-to-atlas sampling: edge masks, texel footprints, backprojection, and
//! incidence.

use nalgebra::Matrix2;
use rayon::prelude::*;

use super::mips::trilinear;
use super::AtlasGeometry;
use crate::render::{ColorImage, ViewMaps};
use crate::{Vec2, Vec3};

/// Marks foreground pixels next to the background or next to a pixel whose
/// position differs by more than `threshold × diagonal` (8-neighbourhood).
/// Background pixels are never marked; pixels outside the image do not count
/// as neighbours.
pub fn edge_mask(view: &ViewMaps, threshold: f64, diagonal: f64) -> Vec<bool> {
    let n = view.resolution();
    let limit = (threshold * diagonal) as f32;
    let limit2 = limit * limit;
    (0..n * n)
        .into_par_iter()
        .map(|i| {
            if !view.is_foreground(i) {
                return false;
            }
            let (x, y) = ((i % n) as isize, (i / n) as isize);
            let p = view.position[i];
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= n as isize || ny >= n as isize {
                        continue;
                    }
                    let j = ny as usize * n + nx as usize;
                    if !view.is_foreground(j) {
                        return true;
                    }
                    let q = view.position[j];
                    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    if d2 > limit2 {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    pub lod_bias: f64,
    /// Anisotropy compensation κ.
    pub kappa: f64,
    pub max_taps: usize,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            lod_bias: -0.5,
            kappa: 0.5,
            max_taps: 8,
        }
    }
}

/// Image-space footprint of one atlas texel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelFootprint {
    /// Image pixels per texel; column 0 is the texel x step, column 1 the y step.
    pub jacobian: Matrix2<f64>,
    /// Unit direction of the major axis in image space.
    pub major_axis: Vec2,
    pub major: f64,
    pub minor: f64,
    pub mip: f64,
    pub taps: usize,
}

impl TexelFootprint {
    /// Closed-form 2×2 SVD of `j`, then
    /// `mip = log2(minor) + bias + κ log2(min(major / minor, max_taps))`
    /// clamped at 0, and `taps = clamp(ceil(major / minor), 1, max_taps)`.
    pub fn new(j: Matrix2<f64>, params: &SampleParams) -> Self {
        let (a, b, c, d) = (j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
        let e = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (e * e - 4.0 * det * det).max(0.0).sqrt();
        let major = ((e + disc) * 0.5).max(0.0).sqrt();
        let minor = ((e - disc) * 0.5).max(0.0).sqrt().min(major);
        // Left singular vector of the larger value: eigenvector of J Jᵀ.
        let theta = 0.5 * (2.0 * (a * c + b * d)).atan2(a * a + b * b - c * c - d * d);
        let major_axis = Vec2::new(theta.cos(), theta.sin());
        let cap = params.max_taps.max(1) as f64;
        let (taps, mip) = if major <= 0.0 {
            (1, 0.0)
        } else if minor <= 0.0 {
            (params.max_taps.max(1), (major / cap).log2() + params.lod_bias + params.kappa * cap.log2())
        } else {
            let ratio = major / minor;
            // Guard against ratios a rounding error above an integer.
            let taps = ((ratio - 1e-9).ceil() as usize).clamp(1, params.max_taps.max(1));
            (taps, minor.log2() + params.lod_bias + params.kappa * ratio.min(cap).log2())
        };
        Self {
            jacobian: j,
            major_axis,
            major,
            minor,
            mip: mip.max(0.0),
            taps,
        }
    }
}

/// Colors sampled from one view, with a validity flag per texel.
#[derive(Debug, Clone, PartialEq)]
pub struct Partial {
    pub color: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

/// Continuous pixel coordinates of `p` in an image of `width` pixels
/// rendered by `view`'s camera (the color image may have a different
/// resolution from the geometry rasters).
fn image_coords(view: &ViewMaps, p: &Vec3, scale: f64) -> Vec2 {
    let s = view.camera.project(p);
    Vec2::new(s.x * scale, s.y * scale)
}

/// Finite-difference Jacobian of the texel-to-image map at texel `i`:
/// central differences where both neighbours are in the atlas, one-sided
/// where only one is, and a quarter-turned copy of the other column when
/// neither is.
pub fn texel_jacobian(geom: &AtlasGeometry, view: &ViewMaps, scale: f64, i: usize) -> Matrix2<f64> {
    let n = geom.resolution;
    let (x, y) = (i % n, i / n);
    let q = |k: usize| image_coords(view, &geom.position[k], scale);
    let column = |prev: Option<usize>, next: Option<usize>| -> Option<Vec2> {
        let prev = prev.filter(|&k| geom.valid[k]);
        let next = next.filter(|&k| geom.valid[k]);
        match (prev, next) {
            (Some(a), Some(b)) => Some((q(b) - q(a)) * 0.5),
            (None, Some(b)) => Some(q(b) - q(i)),
            (Some(a), None) => Some(q(i) - q(a)),
            (None, None) => None,
        }
    };
    let cx = column((x > 0).then(|| i - 1), (x + 1 < n).then(|| i + 1));
    let cy = column((y > 0).then(|| i - n), (y + 1 < n).then(|| i + n));
    let (cx, cy) = match (cx, cy) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, Vec2::new(-a.y, a.x)),
        (None, Some(b)) => (Vec2::new(b.y, -b.x), b),
        (None, None) => (Vec2::zeros(), Vec2::zeros()),
    };
    Matrix2::new(cx.x, cy.x, cx.y, cy.y)
}

/// Anisotropic sample: `taps` trilinear fetches spread evenly over the major
/// axis, averaged.
pub fn sample_footprint(chain: &[ColorImage], center: Vec2, fp: &TexelFootprint) -> [f64; 3] {
    let mut acc = [0.0; 3];
    let n = fp.taps;
    for t in 0..n {
        let off = ((t as f64 + 0.5) / n as f64 - 0.5) * fp.major;
        let p = center + fp.major_axis * off;
        let c = trilinear(chain, p.x, p.y, fp.mip);
        for k in 0..3 {
            acc[k] += c[k];
        }
    }
    acc.map(|v| v / n as f64)
}

/// Backward projection of one view into the atlas. A texel is sampled when
/// it is in the atlas, projects inside the image onto a foreground pixel
/// that is not edge-masked, and (when `weights` is given) has a nonzero
/// weight there.
pub fn backproject_view(
    geom: &AtlasGeometry,
    view: &ViewMaps,
    chain: &[ColorImage],
    mask: &[bool],
    params: &SampleParams,
    weights: Option<&[f64]>,
) -> Partial {
    let res = view.resolution();
    let scale = chain[0].width as f64 / res as f64;
    let texels: Vec<Option<[f32; 3]>> = (0..geom.valid.len())
        .into_par_iter()
        .map(|i| {
            if !geom.valid[i] || weights.is_some_and(|w| w[i] <= 0.0) {
                return None;
            }
            let s = view.camera.project(&geom.position[i]);
            if !(s.x >= 0.0 && s.y >= 0.0 && s.x < res as f64 && s.y < res as f64) {
                return None;
            }
            let pix = s.y as usize * res + s.x as usize;
            if !view.is_foreground(pix) || mask[pix] {
                return None;
            }
            let fp = TexelFootprint::new(texel_jacobian(geom, view, scale, i), params);
            let c = sample_footprint(chain, Vec2::new(s.x * scale, s.y * scale), &fp);
            Some(c.map(|v| v as f32))
        })
        .collect();
    Partial {
        valid: texels.iter().map(Option::is_some).collect(),
        color: texels.into_iter().map(|c| c.unwrap_or([0.0; 3])).collect(),
    }
}

/// `max(0, n · d)` with `d` toward the camera, for texels whose projected
/// depth is within `tolerance` of the view's depth buffer; 0 elsewhere.
pub fn incidence(geom: &AtlasGeometry, view: &ViewMaps, tolerance: f64) -> Vec<f64> {
    let res = view.resolution();
    let toward = view.camera.toward_camera();
    (0..geom.valid.len())
        .into_par_iter()
        .map(|i| {
            if !geom.valid[i] {
                return 0.0;
            }
            let s = view.camera.project(&geom.position[i]);
            if !(s.x >= 0.0 && s.y >= 0.0 && s.x < res as f64 && s.y < res as f64) {
                return 0.0;
            }
            let buffer = view.depth[s.y as usize * res + s.x as usize] as f64;
            if !buffer.is_finite() || (s.z - buffer).abs() > tolerance {
                return 0.0;
            }
            geom.normal[i].dot(&toward).max(0.0)
        })
        .collect()
}
