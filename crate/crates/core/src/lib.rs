//! Post-processing for generated 3D assets.
//!
//! A dense triangle mesh (or a sampled signed-distance grid) plus a set of
//! multi-view color images goes in; a simplified, visibility-culled,
//! UV-unwrapped mesh with a baked tangent-space normal map and a fused color
//! atlas comes out. Each stage lives in its own module and can be used on its
//! own:
//!
//! - [`spatial`]: BVH with ray-cast and closest-point queries.
//! - [`signfield`]: flood-fill sign estimation and marching cubes.
//! - [`simplify`]: round-based QEM edge collapse with edge-constrained placement.
//! - [`visibility`]: multi-view hidden face removal.
//! - [`uv`]: chart segmentation (serial and partitioned), LSCM, atlas packing.
//! - [`bake`]: UV-space G-buffer and tangent-space normal transfer.
//! - [`render`]: orthographic geometry renders for the fixed camera layout.
//! - [`texfuse`]: backprojection, incidence-weighted blending, inpainting, export.
//! - [`metrics`]: Chamfer, Hausdorff, flipped normals, normal angular errors.
//! - [`pipeline`]: configuration, stage graph scheduling, and timing reports.

pub mod bake;
pub mod cli;
pub mod fixtures;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod signfield;
pub mod simplify;
pub mod spatial;
pub mod texfuse;
pub mod uv;
pub mod visibility;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

pub use mesh::{Aabb, TriangleMesh, UvLayer};
