//! UV atlas construction: chart segmentation (serial or partitioned), LSCM
//! parameterization, and skyline packing.
//!
//! Atlas coordinates follow image conventions: `u` grows to the right and
//! `v` grows downward, so texel `(x, y)` covers `[x, x+1]/res × [y, y+1]/res`.

mod lscm;
mod pack;
mod segment;

use rayon::prelude::*;

pub use lscm::{conformal_energy, parameterize_lscm, MAX_SPLIT_DEPTH};
pub use pack::{overlapping_pairs, pack_atlas, AtlasLayout, ChartPlacement};
pub use segment::{make_partitions, merge_pass, segment_charts, segment_parallel, Partition, SegmentParams};

use crate::mesh::{cross2, TriangleMesh, UvLayer};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UvError {
    #[error("chart starting at face {first_face} ({faces} faces) could not be parameterized after {MAX_SPLIT_DEPTH} splits")]
    ChartFailure { first_face: u32, faces: usize },
    #[error("{charts} charts do not fit in a {resolution}² atlas")]
    PackOverflow { charts: usize, resolution: usize },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A set of faces and, once parameterized, one UV per face corner in the
/// chart's own frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Chart {
    pub faces: Vec<u32>,
    pub uv: Vec<[Vec2; 3]>,
}

impl Chart {
    pub fn new(faces: Vec<u32>) -> Self {
        Self { faces, uv: Vec::new() }
    }

    pub fn is_parameterized(&self) -> bool {
        self.uv.len() == self.faces.len()
    }

    pub fn uv_area(&self) -> f64 {
        self.uv
            .iter()
            .map(|t| 0.5 * cross2(&(t[1] - t[0]), &(t[2] - t[0])))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnwrapParams {
    pub segment: SegmentParams,
    /// 1 runs the serial segmentation.
    pub partitions: usize,
    pub halo_rings: usize,
    pub atlas_resolution: usize,
    pub padding: usize,
}

impl Default for UnwrapParams {
    fn default() -> Self {
        Self {
            segment: SegmentParams::default(),
            partitions: 8,
            halo_rings: 3,
            atlas_resolution: 1024,
            padding: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Unwrapped {
    /// Input geometry with a per-corner UV layer in atlas coordinates.
    pub mesh: TriangleMesh,
    /// Parameterized charts in chart-local coordinates.
    pub charts: Vec<Chart>,
    pub layout: AtlasLayout,
    /// Chart of each face.
    pub face_chart: Vec<u32>,
}

impl Unwrapped {
    pub fn occupancy(&self) -> f64 {
        self.layout.occupancy(&self.charts)
    }
}

/// Segments, parameterizes, and packs; the returned mesh carries the atlas
/// UVs. Seams duplicate UV coordinates, never positions.
pub fn unwrap(mesh: &TriangleMesh, params: &UnwrapParams) -> Result<Unwrapped, UvError> {
    if mesh.is_empty() {
        return Err(UvError::EmptyMesh);
    }
    if params.partitions == 0 {
        return Err(UvError::InvalidParams("partitions must be at least 1".into()));
    }
    if params.atlas_resolution <= 2 * params.padding {
        return Err(UvError::InvalidParams(format!(
            "atlas resolution {} leaves no room inside padding {}",
            params.atlas_resolution, params.padding
        )));
    }
    let segments = if params.partitions == 1 {
        segment_charts(mesh, &params.segment)
    } else {
        segment_parallel(mesh, params.partitions, params.halo_rings, &params.segment)
    };
    let nested: Vec<Vec<Chart>> = segments
        .par_iter()
        .map(|c| parameterize_lscm(mesh, c))
        .collect::<Result<_, _>>()?;
    let charts: Vec<Chart> = nested.into_iter().flatten().collect();
    let layout = pack_atlas(&charts, params.atlas_resolution, params.padding)?;
    let mut face_chart = vec![0u32; mesh.face_count()];
    let mut coords = Vec::with_capacity(mesh.face_count() * 3 / 2);
    let mut uv_faces = vec![[0u32; 3]; mesh.face_count()];
    for (ci, chart) in charts.iter().enumerate() {
        // One UV coordinate per (chart, vertex).
        let mut local: std::collections::BTreeMap<u32, u32> = std::collections::BTreeMap::new();
        for (k, &f) in chart.faces.iter().enumerate() {
            face_chart[f as usize] = ci as u32;
            let tri = mesh.faces[f as usize];
            for c in 0..3 {
                let id = *local.entry(tri[c]).or_insert_with(|| {
                    coords.push(layout.map(ci, chart.uv[k][c]));
                    (coords.len() - 1) as u32
                });
                uv_faces[f as usize][c] = id;
            }
        }
    }
    let mut out = mesh.clone();
    out.uv = Some(UvLayer { coords, faces: uv_faces });
    Ok(Unwrapped {
        mesh: out,
        charts,
        layout,
        face_chart,
    })
}
