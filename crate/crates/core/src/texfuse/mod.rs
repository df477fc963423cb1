//! Texture fusion: K view images into one UV atlas.
//!
//! Everything that depends only on geometry (atlas sampling positions, edge
//! masks, incidence, the fill mask, and the inpainting KD-tree) is computed
//! by [`FusionPrep::new`], before any color image is needed. [`FusionPrep::fuse`]
//! then backprojects, blends, and inpaints.

mod blend;
mod export;
mod inpaint;
pub mod mips;
mod project;

use rayon::prelude::*;

pub use blend::{blend, fill_mask, Blended, STANDARD_PRIORS};
pub use export::{export_asset, read_glb, ExportedAsset, GlbContents};
pub use inpaint::{InpaintParams, Inpainter, KdTree};
pub use mips::build_mips;
pub use project::{backproject_view, edge_mask, incidence, sample_footprint, texel_jacobian, Partial, SampleParams, TexelFootprint};

use crate::bake::{uv_coverage, BakeError, NO_FACE};
use crate::mesh::TriangleMesh;
use crate::render::{ColorImage, ViewMaps};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuseError {
    #[error("raster shapes do not match: {0}")]
    ShapeMismatch(String),
    #[error("no texel received color from any view")]
    NothingToInpaint,
    #[error("export components disagree: {0}")]
    ExportMismatch(String),
    #[error(transparent)]
    Atlas(#[from] BakeError),
    #[error("i/o: {0}")]
    Io(String),
}

/// Surface position and smooth normal at every in-chart atlas texel.
#[derive(Debug, Clone)]
pub struct AtlasGeometry {
    pub resolution: usize,
    pub position: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl AtlasGeometry {
    pub fn new(mesh: &TriangleMesh, resolution: usize) -> Result<Self, FuseError> {
        if resolution == 0 {
            return Err(BakeError::InvalidResolution(0).into());
        }
        let (face, bary) = uv_coverage(mesh, resolution)?;
        let normals = mesh.smooth_normals();
        let texels: Vec<(Vec3, Vec3)> = (0..face.len())
            .into_par_iter()
            .map(|i| {
                let f = face[i];
                if f == NO_FACE {
                    return (Vec3::zeros(), Vec3::zeros());
                }
                let tri = mesh.faces[f as usize];
                let b = bary[i];
                let mut p = Vec3::zeros();
                let mut n = Vec3::zeros();
                for k in 0..3 {
                    p += mesh.positions[tri[k] as usize] * b[k];
                    n += normals[tri[k] as usize] * b[k];
                }
                let n = n.try_normalize(1e-300).unwrap_or_else(|| mesh.face_normal(f as usize));
                (p, n)
            })
            .collect();
        Ok(Self {
            resolution,
            position: texels.iter().map(|t| t.0).collect(),
            normal: texels.iter().map(|t| t.1).collect(),
            valid: face.iter().map(|&f| f != NO_FACE).collect(),
        })
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseParams {
    pub atlas_resolution: usize,
    pub alpha: f64,
    pub epsilon: f64,
    /// One prior per view; [`STANDARD_PRIORS`] for the standard layout.
    pub priors: Vec<f64>,
    /// Edge-mask threshold as a fraction of the bounding-box diagonal.
    pub edge_threshold: f64,
    /// Depth test tolerance as a fraction of the bounding-box diagonal.
    pub depth_tolerance: f64,
    pub sampling: SampleParams,
    pub inpaint: InpaintParams,
}

impl Default for FuseParams {
    fn default() -> Self {
        Self {
            atlas_resolution: 2048,
            alpha: 4.0,
            epsilon: 1e-8,
            priors: STANDARD_PRIORS.to_vec(),
            edge_threshold: 0.02,
            depth_tolerance: 0.005,
            sampling: SampleParams::default(),
            inpaint: InpaintParams::default(),
        }
    }
}

/// Fused color atlas with its sampling geometry.
#[derive(Debug, Clone)]
pub struct TextureAtlas {
    pub resolution: usize,
    /// Linear RGB in `[0, 1]`; zero outside the charts.
    pub color: Vec<[f32; 3]>,
    /// Blended or inpainted.
    pub filled: Vec<bool>,
    pub geometry: AtlasGeometry,
}

impl TextureAtlas {
    pub fn to_image(&self) -> ColorImage {
        ColorImage {
            width: self.resolution,
            height: self.resolution,
            data: self.color.clone(),
        }
    }

    /// Copy with colors pushed `radius` texels past the chart borders.
    pub fn dilated(&self, radius: usize) -> ColorImage {
        ColorImage {
            width: self.resolution,
            height: self.resolution,
            data: crate::bake::dilate(&self.color, &self.filled, self.resolution, radius),
        }
    }
}

/// Geometry-only fusion state.
#[derive(Debug, Clone)]
pub struct FusionPrep {
    pub geometry: AtlasGeometry,
    pub views: Vec<ViewMaps>,
    pub masks: Vec<Vec<bool>>,
    pub incidence: Vec<Vec<f64>>,
    pub filled: Vec<bool>,
    pub inpainter: Inpainter,
    pub diagonal: f64,
    pub params: FuseParams,
}

impl FusionPrep {
    pub fn new(mesh: &TriangleMesh, views: &[ViewMaps], params: &FuseParams) -> Result<Self, FuseError> {
        if params.priors.len() != views.len() {
            return Err(FuseError::ShapeMismatch(format!("{} priors for {} views", params.priors.len(), views.len())));
        }
        let geometry = AtlasGeometry::new(mesh, params.atlas_resolution)?;
        let diagonal = mesh.bounds().diagonal();
        let masks: Vec<Vec<bool>> = views.iter().map(|v| edge_mask(v, params.edge_threshold, diagonal)).collect();
        let tol = params.depth_tolerance * diagonal;
        let incidence: Vec<Vec<f64>> = views
            .iter()
            .zip(&masks)
            .map(|(v, m)| {
                // Texels a view cannot sample carry no weight in it.
                let mut inc = incidence(&geometry, v, tol);
                mask_unsampleable(&geometry, v, m, &mut inc);
                inc
            })
            .collect();
        let filled = fill_mask(&incidence, None, &params.priors, params.alpha, params.epsilon);
        let inpainter = Inpainter::new(&geometry.position, &geometry.normal, &filled)?;
        Ok(Self {
            geometry,
            views: views.to_vec(),
            masks,
            incidence,
            filled,
            inpainter,
            diagonal,
            params: params.clone(),
        })
    }

    /// Backprojection, blending, and inpainting for one color image per view.
    pub fn fuse(&self, colors: &[ColorImage]) -> Result<TextureAtlas, FuseError> {
        if colors.len() != self.views.len() {
            return Err(FuseError::ShapeMismatch(format!("{} color images for {} views", colors.len(), self.views.len())));
        }
        let p = &self.params;
        let partials: Vec<Partial> = self
            .views
            .iter()
            .zip(colors)
            .enumerate()
            .map(|(k, (view, img))| {
                let chain = build_mips(img, mips::full_mip_count(img.width, img.height));
                backproject_view(&self.geometry, view, &chain, &self.masks[k], &p.sampling, Some(&self.incidence[k]))
            })
            .collect();
        let blended = blend(&partials, &self.incidence, &p.priors, p.alpha, p.epsilon)?;
        let sigma = p.inpaint.sigma_fraction * self.diagonal;
        let (color, filled) = self.inpainter.apply(
            &blended.color,
            &blended.filled,
            &self.geometry.valid,
            &self.geometry.position,
            &self.geometry.normal,
            sigma,
            &p.inpaint,
        );
        Ok(TextureAtlas {
            resolution: self.geometry.resolution,
            color,
            filled,
            geometry: self.geometry.clone(),
        })
    }
}

/// Zeroes incidence where the texel projects outside the image, onto the
/// background, or onto an edge-masked pixel, matching the texels
/// [`backproject_view`] skips.
fn mask_unsampleable(geom: &AtlasGeometry, view: &ViewMaps, mask: &[bool], inc: &mut [f64]) {
    let res = view.resolution();
    inc.par_iter_mut().enumerate().for_each(|(i, w)| {
        if *w <= 0.0 {
            return;
        }
        let s = view.camera.project(&geom.position[i]);
        // Incidence is already zero outside the image.
        let pix = s.y as usize * res + s.x as usize;
        if !view.is_foreground(pix) || mask[pix] {
            *w = 0.0;
        }
    });
}

/// Convenience wrapper: prepare and fuse in one call.
pub fn fuse(mesh: &TriangleMesh, views: &[ViewMaps], colors: &[ColorImage], params: &FuseParams) -> Result<TextureAtlas, FuseError> {
    FusionPrep::new(mesh, views, params)?.fuse(colors)
}
