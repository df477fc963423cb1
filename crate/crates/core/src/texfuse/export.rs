//! Final asset export: binary glTF plus OBJ/MTL with PNG textures.
//!
//! Atlas images use the crate convention (`v` down, row 0 at `v = 0`), which
//! is also glTF's, so the GLB carries UVs and images unchanged except for the
//! normal map's green channel: our bitangent follows `+v` (down) while glTF
//! expects green to point up. OBJ keeps `vt` verbatim and references
//! row-flipped PNG copies instead; after the flip, green already points up.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::FuseError;
use crate::bake::NormalMap;
use crate::io::{self, GlbMesh, IoError};
use crate::mesh::TriangleMesh;
use crate::render::ColorImage;

pub type GlbContents = GlbMesh;

/// Paths of everything [`export_asset`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedAsset {
    pub glb: PathBuf,
    pub obj: PathBuf,
    pub mtl: PathBuf,
    pub base_color_png: PathBuf,
    pub normal_png: PathBuf,
    /// Row-flipped copies referenced by the MTL.
    pub obj_base_color_png: PathBuf,
    pub obj_normal_png: PathBuf,
    /// Vertex count after splitting at UV seams.
    pub glb_vertices: usize,
    pub faces: usize,
}

fn io_err(e: impl std::fmt::Display) -> FuseError {
    FuseError::Io(e.to_string())
}

impl From<IoError> for FuseError {
    fn from(e: IoError) -> Self {
        io_err(e)
    }
}

/// Splits vertices on distinct `(position, uv)` pairs, first seen in corner
/// order.
pub(crate) fn glb_buffers(mesh: &TriangleMesh, base_color: Vec<u8>, normal_texture: Vec<u8>) -> Result<GlbMesh, FuseError> {
    let uv = mesh.uv.as_ref().ok_or_else(|| FuseError::ExportMismatch("mesh has no UV layer".into()))?;
    let normals = mesh.smooth_normals();
    let mut slot: HashMap<(u32, u32), u32> = HashMap::new();
    let mut out = GlbMesh {
        positions: Vec::new(),
        normals: Vec::new(),
        texcoords: Vec::new(),
        indices: Vec::with_capacity(mesh.faces.len() * 3),
        base_color,
        normal_texture: Some(normal_texture),
    };
    for (f, t) in mesh.faces.iter().zip(&uv.faces) {
        for k in 0..3 {
            let key = (f[k], t[k]);
            let next = out.positions.len() as u32;
            let i = *slot.entry(key).or_insert(next);
            if i == next {
                let p = mesh.positions[f[k] as usize];
                let n = normals[f[k] as usize];
                let c = uv.coords[t[k] as usize];
                out.positions.push([p.x as f32, p.y as f32, p.z as f32]);
                out.normals.push([n.x as f32, n.y as f32, n.z as f32]);
                out.texcoords.push([c.x as f32, c.y as f32]);
            }
            out.indices.push(i);
        }
    }
    Ok(out)
}

fn flip_green(data: &[[u8; 3]]) -> Vec<[u8; 3]> {
    data.iter().map(|c| [c[0], 255 - c[1], c[2]]).collect()
}

pub fn read_glb(path: &Path) -> Result<GlbContents, FuseError> {
    Ok(io::decode_glb(&fs::read(path).map_err(io_err)?)?)
}

/// Writes `{stem}.glb`, `{stem}.obj`, `{stem}.mtl`, and the textures to
/// `out_dir`, then reads everything back and checks it bit for bit.
pub fn export_asset(mesh: &TriangleMesh, normal_map: &NormalMap, atlas: &ColorImage, out_dir: &Path, stem: &str) -> Result<ExportedAsset, FuseError> {
    if mesh.uv.is_none() {
        return Err(FuseError::ExportMismatch("mesh has no UV layer".into()));
    }
    fs::create_dir_all(out_dir).map_err(io_err)?;
    let file = |suffix: &str| out_dir.join(format!("{stem}{suffix}"));
    let asset = ExportedAsset {
        glb: file(".glb"),
        obj: file(".obj"),
        mtl: file(".mtl"),
        base_color_png: file("_basecolor.png"),
        normal_png: file("_normal.png"),
        obj_base_color_png: file("_basecolor_obj.png"),
        obj_normal_png: file("_normal_obj.png"),
        glb_vertices: 0,
        faces: mesh.faces.len(),
    };

    let (w, h) = (atlas.width, atlas.height);
    let n = normal_map.resolution;
    let color = atlas.to_rgb8();
    let glb_normal = flip_green(&normal_map.data);
    let images = [
        (&asset.base_color_png, w, h, color.clone()),
        (&asset.normal_png, n, n, glb_normal.clone()),
        (&asset.obj_base_color_png, w, h, io::flip_rows(&color, w)),
        (&asset.obj_normal_png, n, n, io::flip_rows(&normal_map.data, n)),
    ];
    for (path, w, h, data) in &images {
        io::write_png_rgb8(path, *w, *h, data)?;
    }

    let glb = glb_buffers(mesh, io::encode_png_rgb8(w, h, &color)?, io::encode_png_rgb8(n, n, &glb_normal)?)?;
    fs::write(&asset.glb, io::encode_glb(&glb)?).map_err(io_err)?;

    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mtl = format!(
        "newmtl material\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd {}\nnorm {}\nmap_Bump -bm 1 {}\n",
        name(&asset.obj_base_color_png),
        name(&asset.obj_normal_png),
        name(&asset.obj_normal_png),
    );
    fs::write(&asset.mtl, mtl).map_err(io_err)?;
    io::write_obj(&asset.obj, mesh, Some(&name(&asset.mtl)))?;

    // read back
    let back = read_glb(&asset.glb)?;
    if back != glb {
        return Err(FuseError::ExportMismatch("GLB buffers differ after re-import".into()));
    }
    let obj = io::read_obj(&asset.obj)?;
    if obj.positions != mesh.positions || obj.faces != mesh.faces || obj.uv != mesh.uv {
        return Err(FuseError::ExportMismatch("OBJ differs after re-import".into()));
    }
    for (path, w, h, data) in &images {
        if io::read_png_rgb8(path)? != (*w, *h, data.clone()) {
            return Err(FuseError::ExportMismatch(format!("{} differs after re-import", path.display())));
        }
    }
    Ok(ExportedAsset {
        glb_vertices: glb.positions.len(),
        ..asset
    })
}
