//! Orthographic rasterization for the fixed camera layout.
//!
//! World convention: +z up, +x front, right-handed. Images have their origin
//! at the top-left texel and are stored row-major. A camera looks along
//! `direction`; image right is `direction × up`. Depth is measured along
//! `-direction`, i.e. `depth = dot(p, -direction)`, so larger depth is closer
//! to the camera. Background texels carry depth `+∞`.
//!
//! The same z-buffer rasterizer backs the visibility stage and the flipped
//! normal metric: for an orthographic camera, testing pixel centers against
//! triangles is equivalent to casting one ray per pixel.

use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::{Vec2, Vec3};

/// Face id of texels not covered by any triangle.
pub const NO_FACE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("camera direction and up are not orthogonal (dot = {0})")]
    NotOrthogonal(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoCamera {
    /// Unit view direction (from the camera into the scene).
    pub direction: Vec3,
    pub up: Vec3,
    /// Point the image is centered on.
    pub center: Vec3,
    /// Half of the world-space side of the square image.
    pub half_extent: f64,
    pub resolution: usize,
}

impl OrthoCamera {
    pub fn new(direction: Vec3, up: Vec3, half_extent: f64, resolution: usize) -> Result<Self, RenderError> {
        let d = direction
            .try_normalize(1e-12)
            .ok_or_else(|| RenderError::InvalidCamera("zero direction".into()))?;
        let u = up
            .try_normalize(1e-12)
            .ok_or_else(|| RenderError::InvalidCamera("zero up vector".into()))?;
        let dot = d.dot(&u);
        if dot.abs() > 1e-6 {
            return Err(RenderError::NotOrthogonal(dot));
        }
        if !(half_extent > 0.0) || resolution == 0 {
            return Err(RenderError::InvalidCamera(format!(
                "half extent {half_extent}, resolution {resolution}"
            )));
        }
        Ok(Self {
            direction: d,
            up: u,
            center: Vec3::zeros(),
            half_extent,
            resolution,
        })
    }

    /// Camera looking along `direction` with an arbitrary but deterministic
    /// up vector.
    pub fn looking(direction: Vec3, center: Vec3, half_extent: f64, resolution: usize) -> Self {
        let d = direction.normalize();
        let helper = if d.z.abs() < 0.9 { Vec3::z() } else { Vec3::y() };
        let up = (helper - d * d.dot(&helper)).normalize();
        Self {
            direction: d,
            up,
            center,
            half_extent,
            resolution,
        }
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = center;
        self
    }

    pub fn right(&self) -> Vec3 {
        self.direction.cross(&self.up)
    }

    /// Unit vector from the scene toward the camera.
    pub fn toward_camera(&self) -> Vec3 {
        -self.direction
    }

    /// Continuous pixel coordinates `(x, y)` (texel centers at `i + 0.5`)
    /// and depth of a world point.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Vec3 {
        let rel = p - self.center;
        let s = self.resolution as f64 / (2.0 * self.half_extent);
        let x = (rel.dot(&self.right()) + self.half_extent) * s;
        let y = (self.half_extent - rel.dot(&self.up)) * s;
        Vec3::new(x, y, p.dot(&-self.direction))
    }

    /// Inverse of [`project`](Self::project).
    pub fn unproject(&self, x: f64, y: f64, depth: f64) -> Vec3 {
        let s = 2.0 * self.half_extent / self.resolution as f64;
        let u = x * s - self.half_extent;
        let v = self.half_extent - y * s;
        let base = self.center + self.right() * u + self.up * v;
        // Move along the view axis until dot(p, -direction) == depth.
        base + self.direction * (base.dot(&-self.direction) - depth)
    }

    /// Ray through the center of texel `(col, row)`, starting `back` units
    /// behind the image plane through `center`.
    pub fn pixel_ray(&self, col: usize, row: usize, back: f64) -> (Vec3, Vec3) {
        let s = 2.0 * self.half_extent / self.resolution as f64;
        let u = (col as f64 + 0.5) * s - self.half_extent;
        let v = self.half_extent - (row as f64 + 0.5) * s;
        let origin = self.center + self.right() * u + self.up * v - self.direction * back;
        (origin, self.direction)
    }
}

/// Names of the ten standard views, in camera order.
pub const STANDARD_VIEW_NAMES: [&str; 10] = [
    "front", "front_left", "left", "rear_left", "rear", "rear_right", "right", "front_right", "top", "bottom",
];

/// Eight side views at 45° azimuth steps starting from the front (+x), then
/// top and bottom. Side cameras use +z up; top and bottom use +y up.
pub fn standard_cameras(resolution: usize) -> Vec<OrthoCamera> {
    let half = 0.52;
    let mut out = Vec::with_capacity(10);
    for k in 0..8 {
        let az = (k as f64 * 45.0).to_radians();
        let eye = Vec3::new(az.cos(), az.sin(), 0.0);
        out.push(OrthoCamera {
            direction: -eye,
            up: Vec3::z(),
            center: Vec3::zeros(),
            half_extent: half,
            resolution,
        });
    }
    for dir in [-Vec3::z(), Vec3::z()] {
        out.push(OrthoCamera {
            direction: dir,
            up: Vec3::y(),
            center: Vec3::zeros(),
            half_extent: half,
            resolution,
        });
    }
    out
}

/// Per-texel nearest face, barycentrics, and depth.
#[derive(Debug, Clone)]
pub struct FaceRaster {
    pub resolution: usize,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    pub depth: Vec<f64>,
}

impl FaceRaster {
    pub fn covered(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }
}

/// Directed-edge ownership for texel centers exactly on an edge: exactly one
/// of `a→b` and `b→a` owns it.
#[inline]
fn owns_edge(dx: f64, dy: f64) -> bool {
    dy > 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Visits every pixel of a `width × height` grid whose center `(c+0.5,
/// r+0.5)` lies inside the triangle `p` (pixel units), with the barycentric
/// weights of the original corners. Centers on a shared edge go to exactly one
/// of the two triangles when both have the same orientation. Degenerate
/// triangles cover nothing.
pub(crate) fn for_each_covered(p: [Vec2; 3], width: usize, height: usize, mut visit: impl FnMut(usize, usize, [f64; 3])) {
    let area = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
    if area == 0.0 || !area.is_finite() || width == 0 || height == 0 {
        return;
    }
    // Reorder so the edge functions are positive inside.
    let (order, inv) = if area > 0.0 { ([0, 1, 2], 1.0 / area) } else { ([0, 2, 1], -1.0 / area) };
    let q = order.map(|i| p[i]);
    let xmin = q.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
    let xmax = q.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
    let ymin = q.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
    let ymax = q.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
    let c0 = ((xmin - 0.5).ceil().max(0.0)) as usize;
    let r0 = ((ymin - 0.5).ceil().max(0.0)) as usize;
    let c1 = (xmax - 0.5).floor();
    let r1 = (ymax - 0.5).floor();
    if c1 < 0.0 || r1 < 0.0 {
        return;
    }
    let c1 = (c1 as usize).min(width - 1);
    let r1 = (r1 as usize).min(height - 1);
    if c0 > c1 || r0 > r1 {
        return;
    }
    let owns = [
        owns_edge(q[2].x - q[1].x, q[2].y - q[1].y),
        owns_edge(q[0].x - q[2].x, q[0].y - q[2].y),
        owns_edge(q[1].x - q[0].x, q[1].y - q[0].y),
    ];
    for row in r0..=r1 {
        let py = row as f64 + 0.5;
        for col in c0..=c1 {
            let px = col as f64 + 0.5;
            // w_i is the edge function opposite vertex i.
            let w = [
                (q[2].x - q[1].x) * (py - q[1].y) - (q[2].y - q[1].y) * (px - q[1].x),
                (q[0].x - q[2].x) * (py - q[2].y) - (q[0].y - q[2].y) * (px - q[2].x),
                (q[1].x - q[0].x) * (py - q[0].y) - (q[1].y - q[0].y) * (px - q[0].x),
            ];
            if (0..3).any(|i| w[i] < 0.0 || (w[i] == 0.0 && !owns[i])) {
                continue;
            }
            let mut b = [0.0; 3];
            for k in 0..3 {
                b[order[k]] = w[k] * inv;
            }
            visit(col, row, b);
        }
    }
}

/// Z-buffered coverage of `mesh` in `cam`. With `cull_back`, triangles whose
/// normal points away from the camera are skipped. Depth ties keep the lower
/// face index.
pub fn rasterize(mesh: &TriangleMesh, cam: &OrthoCamera, cull_back: bool) -> FaceRaster {
    let n = cam.resolution;
    let mut face = vec![NO_FACE; n * n];
    let mut bary = vec![[0.0; 3]; n * n];
    let mut depth = vec![f64::INFINITY; n * n];
    let projected: Vec<Vec3> = mesh.positions.iter().map(|p| cam.project(p)).collect();
    for (f, tri) in mesh.faces.iter().enumerate() {
        let p = tri.map(|v| projected[v as usize]);
        if cull_back {
            // Signed area in image coordinates (y down); negative means the
            // triangle is counter-clockwise as seen from the camera.
            let area = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[1].y - p[0].y) * (p[2].x - p[0].x);
            if area >= 0.0 {
                continue;
            }
        }
        for_each_covered(p.map(|v| Vec2::new(v.x, v.y)), n, n, |col, row, b| {
            let d = b[0] * p[0].z + b[1] * p[1].z + b[2] * p[2].z;
            let i = row * n + col;
            if face[i] == NO_FACE || d > depth[i] {
                depth[i] = d;
                face[i] = f as u32;
                bary[i] = b;
            }
        });
    }
    FaceRaster {
        resolution: n,
        face,
        bary,
        depth,
    }
}

/// Linear RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, fill: [f32; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    pub fn to_rgb8(&self) -> Vec<[u8; 3]> {
        self.data
            .iter()
            .map(|c| c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, data: &[[u8; 3]]) -> Self {
        Self {
            width,
            height,
            data: data.iter().map(|c| c.map(|v| v as f32 / 255.0)).collect(),
        }
    }
}

/// Geometry rasters for one camera.
#[derive(Debug, Clone)]
pub struct ViewMaps {
    pub camera: OrthoCamera,
    pub position: Vec<[f32; 3]>,
    pub normal: Vec<[f32; 3]>,
    /// `+∞` on background texels.
    pub depth: Vec<f32>,
    pub face: Vec<u32>,
}

impl ViewMaps {
    pub fn resolution(&self) -> usize {
        self.camera.resolution
    }

    pub fn is_foreground(&self, i: usize) -> bool {
        self.depth[i].is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct ViewSet {
    pub views: Vec<ViewMaps>,
    /// Externally supplied view images, one per camera.
    pub colors: Option<Vec<ColorImage>>,
}

/// Renders position, smooth-normal, and depth maps for each camera.
pub fn render_geometry(mesh: &TriangleMesh, cameras: &[OrthoCamera]) -> ViewSet {
    let normals = mesh.smooth_normals();
    let views = cameras
        .par_iter()
        .map(|cam| {
            let r = rasterize(mesh, cam, false);
            let len = r.face.len();
            let mut position = vec![[0.0f32; 3]; len];
            let mut normal = vec![[0.0f32; 3]; len];
            let mut depth = vec![f32::INFINITY; len];
            for i in 0..len {
                let f = r.face[i];
                if f == NO_FACE {
                    continue;
                }
                let tri = mesh.faces[f as usize];
                let b = r.bary[i];
                let mut p = Vec3::zeros();
                let mut nn = Vec3::zeros();
                for k in 0..3 {
                    p += mesh.positions[tri[k] as usize] * b[k];
                    nn += normals[tri[k] as usize] * b[k];
                }
                let nn = nn.try_normalize(1e-300).unwrap_or_else(|| mesh.face_normal(f as usize));
                let pf = [p.x as f32, p.y as f32, p.z as f32];
                position[i] = pf;
                normal[i] = [nn.x as f32, nn.y as f32, nn.z as f32];
                // Derived from the stored (rounded) position so the two agree.
                let d = -cam.direction;
                depth[i] = (pf[0] as f64 * d.x + pf[1] as f64 * d.y + pf[2] as f64 * d.z) as f32;
            }
            ViewMaps {
                camera: *cam,
                position,
                normal,
                depth,
                face: r.face,
            }
        })
        .collect();
    ViewSet { views, colors: None }
}
