//! File formats: Wavefront OBJ, 8-bit PNG, raw `f32`/`u32` rasters, view
//! sets with `cameras.json`, and binary glTF.
//!
//! OBJ texture coordinates are written and read verbatim in the crate's
//! image convention (`v` down). Floats are printed with the shortest
//! representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::{TriangleMesh, UvLayer};
use crate::render::{ColorImage, OrthoCamera, ViewMaps, NO_FACE};
use crate::{Vec2, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------- OBJ

/// Resolves a 1-based (or negative, relative) OBJ index.
fn obj_index(tok: &str, count: usize) -> Option<u32> {
    let i: i64 = tok.parse().ok()?;
    let idx = if i > 0 { i - 1 } else { count as i64 + i };
    (0..count as i64).contains(&idx).then_some(idx as u32)
}

/// Reads vertices, texture coordinates, and faces; polygons are fan
/// triangulated. A UV layer is kept only if every face references one.
pub fn read_obj(path: &Path) -> Result<TriangleMesh, IoError> {
    let file = BufReader::new(fs::File::open(path)?);
    let mut positions = Vec::new();
    let mut coords = Vec::new();
    let mut faces = Vec::new();
    let mut uv_faces = Vec::new();
    let mut all_uv = true;
    for (ln, line) in file.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let mut nums = |n: usize| -> Result<Vec<f64>, IoError> {
            let v: Vec<f64> = it.by_ref().take(n).map(str::parse).collect::<Result<_, _>>().map_err(|e| parse_err(path, ln + 1, format!("{e}")))?;
            if v.len() < n {
                return Err(parse_err(path, ln + 1, format!("expected {n} numbers")));
            }
            Ok(v)
        };
        match tag {
            "v" => {
                let v = nums(3)?;
                positions.push(Vec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = nums(2)?;
                coords.push(Vec2::new(v[0], v[1]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let v = parts
                        .next()
                        .and_then(|t| obj_index(t, positions.len()))
                        .ok_or_else(|| parse_err(path, ln + 1, format!("bad vertex reference {tok}")))?;
                    let t = match parts.next() {
                        Some(t) if !t.is_empty() => {
                            Some(obj_index(t, coords.len()).ok_or_else(|| parse_err(path, ln + 1, format!("bad texture reference {tok}")))?)
                        }
                        _ => None,
                    };
                    corners.push((v, t));
                }
                if corners.len() < 3 {
                    return Err(parse_err(path, ln + 1, "face with fewer than 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    let c = [corners[0], corners[k], corners[k + 1]];
                    faces.push(c.map(|x| x.0));
                    match (c[0].1, c[1].1, c[2].1) {
                        (Some(a), Some(b), Some(d)) => uv_faces.push([a, b, d]),
                        _ => all_uv = false,
                    }
                }
            }
            _ => {}
        }
    }
    let mut mesh = TriangleMesh::new(positions, faces);
    if all_uv && !mesh.faces.is_empty() && !coords.is_empty() {
        mesh.uv = Some(UvLayer { coords, faces: uv_faces });
    }
    Ok(mesh)
}

/// Writes positions, UVs (if any), and faces; `mtl` adds `mtllib` and
/// `usemtl` lines for a material named `material`.
pub fn write_obj(path: &Path, mesh: &TriangleMesh, mtl: Option<&str>) -> Result<(), IoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut s = String::with_capacity(64);
    if let Some(m) = mtl {
        writeln!(w, "mtllib {m}\nusemtl material")?;
    }
    for p in &mesh.positions {
        s.clear();
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        w.write_all(s.as_bytes())?;
    }
    if let Some(uv) = &mesh.uv {
        for t in &uv.coords {
            s.clear();
            let _ = writeln!(s, "vt {} {}", t.x, t.y);
            w.write_all(s.as_bytes())?;
        }
        for (f, t) in mesh.faces.iter().zip(&uv.faces) {
            s.clear();
            let _ = writeln!(s, "f {}/{} {}/{} {}/{}", f[0] + 1, t[0] + 1, f[1] + 1, t[1] + 1, f[2] + 1, t[2] + 1);
            w.write_all(s.as_bytes())?;
        }
    } else {
        for f in &mesh.faces {
            s.clear();
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            w.write_all(s.as_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- PNG

pub fn write_png_rgb8(path: &Path, width: usize, height: usize, data: &[[u8; 3]]) -> Result<(), IoError> {
    if data.len() != width * height {
        return Err(IoError::Format(format!("{} pixels for a {width}x{height} image", data.len())));
    }
    image::save_buffer(path, data.as_flattened(), width as u32, height as u32, image::ColorType::Rgb8)?;
    Ok(())
}

pub fn read_png_rgb8(path: &Path) -> Result<(usize, usize, Vec<[u8; 3]>), IoError> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Ok((w as usize, h as usize, data))
}

/// PNG bytes of an RGB8 image.
pub fn encode_png_rgb8(width: usize, height: usize, data: &[[u8; 3]]) -> Result<Vec<u8>, IoError> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(data.as_flattened(), width as u32, height as u32, image::ExtendedColorType::Rgb8)?;
    Ok(out)
}

pub fn write_color_png(path: &Path, img: &ColorImage) -> Result<(), IoError> {
    write_png_rgb8(path, img.width, img.height, &img.to_rgb8())
}

pub fn read_color_png(path: &Path) -> Result<ColorImage, IoError> {
    let (w, h, data) = read_png_rgb8(path)?;
    Ok(ColorImage::from_rgb8(w, h, &data))
}

/// Rows in reverse order.
pub fn flip_rows<T: Copy>(data: &[T], width: usize) -> Vec<T> {
    data.chunks(width.max(1)).rev().flatten().copied().collect()
}

// ---------------------------------------------------------------- raw rasters

const RASTER_MAGIC: &[u8; 4] = b"AFR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F32 = 0,
    U32 = 1,
}

/// Little-endian raster: magic `AFR1`, then `u32` dtype (0 = f32, 1 = u32),
/// width, height, channels, then row-major samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn write_raw(path: &Path, dtype: Dtype, w: usize, h: usize, c: usize, words: impl Iterator<Item = [u8; 4]>) -> Result<(), IoError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(RASTER_MAGIC)?;
    for v in [dtype as u32, w as u32, h as u32, c as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    for word in words {
        out.write_all(&word)?;
    }
    out.flush()?;
    Ok(())
}

fn read_raw(path: &Path, want: Dtype) -> Result<(usize, usize, usize, Vec<[u8; 4]>), IoError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[..4] != RASTER_MAGIC {
        return Err(IoError::Format(format!("{}: not a raster file", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let (dtype, w, h, c) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
    if dtype != want as u32 {
        return Err(IoError::Format(format!("{}: dtype {dtype}, expected {}", path.display(), want as u32)));
    }
    let n = w * h * c;
    if bytes.len() != 20 + 4 * n {
        return Err(IoError::Format(format!("{}: {} bytes for {w}x{h}x{c}", path.display(), bytes.len())));
    }
    Ok((w, h, c, bytes[20..].chunks_exact(4).map(|b| b.try_into().expect("4 bytes")).collect()))
}

pub fn write_raster(path: &Path, r: &Raster) -> Result<(), IoError> {
    if r.data.len() != r.width * r.height * r.channels {
        return Err(IoError::Format("raster size does not match its data".into()));
    }
    write_raw(path, Dtype::F32, r.width, r.height, r.channels, r.data.iter().map(|v| v.to_le_bytes()))
}

pub fn read_raster(path: &Path) -> Result<Raster, IoError> {
    let (width, height, channels, words) = read_raw(path, Dtype::F32)?;
    Ok(Raster {
        width,
        height,
        channels,
        data: words.into_iter().map(f32::from_le_bytes).collect(),
    })
}

pub fn write_raster_u32(path: &Path, w: usize, h: usize, data: &[u32]) -> Result<(), IoError> {
    write_raw(path, Dtype::U32, w, h, 1, data.iter().map(|v| v.to_le_bytes()))
}

pub fn read_raster_u32(path: &Path) -> Result<(usize, usize, Vec<u32>), IoError> {
    let (w, h, _, words) = read_raw(path, Dtype::U32)?;
    Ok((w, h, words.into_iter().map(u32::from_le_bytes).collect()))
}

// ---------------------------------------------------------------- views

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub index: usize,
    pub name: String,
    pub direction: [f64; 3],
    pub up: [f64; 3],
    pub center: [f64; 3],
    pub half_extent: f64,
    pub resolution: usize,
}

impl CameraRecord {
    pub fn from_camera(index: usize, name: &str, c: &OrthoCamera) -> Self {
        Self {
            index,
            name: name.to_string(),
            direction: c.direction.into(),
            up: c.up.into(),
            center: c.center.into(),
            half_extent: c.half_extent,
            resolution: c.resolution,
        }
    }

    pub fn camera(&self) -> OrthoCamera {
        OrthoCamera {
            direction: self.direction.into(),
            up: self.up.into(),
            center: self.center.into(),
            half_extent: self.half_extent,
            resolution: self.resolution,
        }
    }
}

fn view_file(dir: &Path, k: usize, kind: &str) -> std::path::PathBuf {
    dir.join(format!("view{k}_{kind}.raw"))
}

/// Writes `view{k}_{pos,nrm,depth,face}.raw` and `cameras.json`.
pub fn write_views(dir: &Path, views: &[ViewMaps], names: &[&str]) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    let mut records = Vec::new();
    for (k, v) in views.iter().enumerate() {
        let n = v.resolution();
        let name = names.get(k).copied().unwrap_or("view");
        records.push(CameraRecord::from_camera(k, name, &v.camera));
        let flat3 = |d: &[[f32; 3]]| d.as_flattened().to_vec();
        write_raster(&view_file(dir, k, "pos"), &Raster { width: n, height: n, channels: 3, data: flat3(&v.position) })?;
        write_raster(&view_file(dir, k, "nrm"), &Raster { width: n, height: n, channels: 3, data: flat3(&v.normal) })?;
        write_raster(&view_file(dir, k, "depth"), &Raster { width: n, height: n, channels: 1, data: v.depth.clone() })?;
        write_raster_u32(&view_file(dir, k, "face"), n, n, &v.face)?;
    }
    fs::write(dir.join("cameras.json"), serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

/// Inverse of [`write_views`].
pub fn read_views(dir: &Path) -> Result<Vec<ViewMaps>, IoError> {
    let records: Vec<CameraRecord> = serde_json::from_str(&fs::read_to_string(dir.join("cameras.json"))?)?;
    let mut out = Vec::with_capacity(records.len());
    for r in &records {
        let cam = r.camera();
        let n = cam.resolution;
        let k = r.index;
        let pos = read_raster(&view_file(dir, k, "pos"))?;
        let nrm = read_raster(&view_file(dir, k, "nrm"))?;
        let depth = read_raster(&view_file(dir, k, "depth"))?;
        let face = view_file(dir, k, "face");
        let face = if face.exists() {
            read_raster_u32(&face)?.2
        } else {
            depth.data.iter().map(|d| if d.is_finite() { 0 } else { NO_FACE }).collect()
        };
        for (name, r, c) in [("pos", &pos, 3), ("nrm", &nrm, 3), ("depth", &depth, 1)] {
            if r.width != n || r.height != n || r.channels != c {
                return Err(IoError::Format(format!("view {k} {name}: {}x{}x{}", r.width, r.height, r.channels)));
            }
        }
        let tri = |d: Vec<f32>| d.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        out.push(ViewMaps {
            camera: cam,
            position: tri(pos.data),
            normal: tri(nrm.data),
            depth: depth.data,
            face,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- GLB

/// Vertex buffers of a single textured glTF primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct GlbMesh {
    pub positions: Vec<[f32; 3]>,
    pub normals: Vec<[f32; 3]>,
    pub texcoords: Vec<[f32; 2]>,
    pub indices: Vec<u32>,
    /// PNG bytes.
    pub base_color: Vec<u8>,
    pub normal_texture: Option<Vec<u8>>,
}

const GLB_MAGIC: u32 = 0x4654_6C67;
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;

fn pad4(v: &mut Vec<u8>, byte: u8) {
    while !v.len().is_multiple_of(4) {
        v.push(byte);
    }
}

/// Serializes a one-primitive glTF 2.0 binary with a base-color texture and
/// an optional normal texture.
pub fn encode_glb(m: &GlbMesh) -> Result<Vec<u8>, IoError> {
    use serde_json::json;
    let mut bin: Vec<u8> = Vec::new();
    let mut views = Vec::new();
    let mut push_view = |bin: &mut Vec<u8>, bytes: &[u8], target: Option<u32>| {
        pad4(bin, 0);
        let offset = bin.len();
        bin.extend_from_slice(bytes);
        let mut v = json!({ "buffer": 0, "byteOffset": offset, "byteLength": bytes.len() });
        if let Some(t) = target {
            v["target"] = json!(t);
        }
        views.push(v);
        views.len() - 1
    };
    let f32_bytes = |v: &[f32]| v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>();
    let pos_view = push_view(&mut bin, &f32_bytes(m.positions.as_flattened()), Some(34962));
    let nrm_view = push_view(&mut bin, &f32_bytes(m.normals.as_flattened()), Some(34962));
    let uv_view = push_view(&mut bin, &f32_bytes(m.texcoords.as_flattened()), Some(34962));
    let idx_bytes: Vec<u8> = m.indices.iter().flat_map(|x| x.to_le_bytes()).collect();
    let idx_view = push_view(&mut bin, &idx_bytes, Some(34963));
    let base_view = push_view(&mut bin, &m.base_color, None);
    let normal_view = m.normal_texture.as_ref().map(|png| push_view(&mut bin, png, None));
    pad4(&mut bin, 0);

    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for p in &m.positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let n = m.positions.len();
    let accessors = json!([
        { "bufferView": pos_view, "componentType": 5126, "count": n, "type": "VEC3", "min": lo, "max": hi },
        { "bufferView": nrm_view, "componentType": 5126, "count": m.normals.len(), "type": "VEC3" },
        { "bufferView": uv_view, "componentType": 5126, "count": m.texcoords.len(), "type": "VEC2" },
        { "bufferView": idx_view, "componentType": 5125, "count": m.indices.len(), "type": "SCALAR" },
    ]);
    let mut images = vec![json!({ "bufferView": base_view, "mimeType": "image/png" })];
    let mut textures = vec![json!({ "source": 0, "sampler": 0 })];
    let mut material = json!({
        "name": "material",
        "pbrMetallicRoughness": { "baseColorTexture": { "index": 0 }, "metallicFactor": 0.0, "roughnessFactor": 1.0 },
    });
    if let Some(v) = normal_view {
        images.push(json!({ "bufferView": v, "mimeType": "image/png" }));
        textures.push(json!({ "source": 1, "sampler": 0 }));
        material["normalTexture"] = json!({ "index": 1 });
    }
    let doc = json!({
        "asset": { "version": "2.0", "generator": "asset-forge" },
        "scene": 0,
        "scenes": [{ "nodes": [0] }],
        "nodes": [{ "mesh": 0 }],
        "meshes": [{ "primitives": [{
            "attributes": { "POSITION": 0, "NORMAL": 1, "TEXCOORD_0": 2 },
            "indices": 3,
            "material": 0,
            "mode": 4,
        }] }],
        "materials": [material],
        "textures": textures,
        "images": images,
        "samplers": [{ "magFilter": 9729, "minFilter": 9987, "wrapS": 33071, "wrapT": 33071 }],
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{ "byteLength": bin.len() }],
    });
    let mut json_bytes = serde_json::to_vec(&doc)?;
    pad4(&mut json_bytes, b' ');
    let total = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    for v in [GLB_MAGIC, 2, total as u32, json_bytes.len() as u32, CHUNK_JSON] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&json_bytes);
    for v in [bin.len() as u32, CHUNK_BIN] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&bin);
    Ok(out)
}

/// Parses what [`encode_glb`] writes (first primitive of the first mesh).
pub fn decode_glb(bytes: &[u8]) -> Result<GlbMesh, IoError> {
    let bad = |m: &str| IoError::Format(format!("glb: {m}"));
    let u32_at = |i: usize| -> Result<u32, IoError> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated"))
    };
    if u32_at(0)? != GLB_MAGIC || u32_at(4)? != 2 || u32_at(8)? as usize != bytes.len() {
        return Err(bad("bad header"));
    }
    let json_len = u32_at(12)? as usize;
    if u32_at(16)? != CHUNK_JSON {
        return Err(bad("first chunk is not JSON"));
    }
    let doc: serde_json::Value = serde_json::from_slice(bytes.get(20..20 + json_len).ok_or_else(|| bad("truncated JSON"))?)?;
    let bin_start = 20 + json_len;
    let bin_len = u32_at(bin_start)? as usize;
    if u32_at(bin_start + 4)? != CHUNK_BIN {
        return Err(bad("second chunk is not BIN"));
    }
    let bin = bytes.get(bin_start + 8..bin_start + 8 + bin_len).ok_or_else(|| bad("truncated BIN"))?;
    let view_bytes = |view: &serde_json::Value| -> Result<&[u8], IoError> {
        let v = &doc["bufferViews"][view.as_u64().ok_or_else(|| bad("missing bufferView"))? as usize];
        let off = v["byteOffset"].as_u64().unwrap_or(0) as usize;
        let len = v["byteLength"].as_u64().ok_or_else(|| bad("bufferView without length"))? as usize;
        bin.get(off..off + len).ok_or_else(|| bad("bufferView out of range"))
    };
    let accessor = |i: &serde_json::Value| -> Result<(&[u8], usize), IoError> {
        let a = &doc["accessors"][i.as_u64().ok_or_else(|| bad("missing accessor"))? as usize];
        Ok((view_bytes(&a["bufferView"])?, a["count"].as_u64().ok_or_else(|| bad("accessor without count"))? as usize))
    };
    let floats = |b: &[u8]| b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect::<Vec<f32>>();
    let prim = &doc["meshes"][0]["primitives"][0];
    let (pb, pn) = accessor(&prim["attributes"]["POSITION"])?;
    let (nb, nn) = accessor(&prim["attributes"]["NORMAL"])?;
    let (tb, tn) = accessor(&prim["attributes"]["TEXCOORD_0"])?;
    let (ib, inn) = accessor(&prim["indices"])?;
    let positions: Vec<[f32; 3]> = floats(pb).chunks_exact(3).take(pn).map(|c| [c[0], c[1], c[2]]).collect();
    let normals: Vec<[f32; 3]> = floats(nb).chunks_exact(3).take(nn).map(|c| [c[0], c[1], c[2]]).collect();
    let texcoords: Vec<[f32; 2]> = floats(tb).chunks_exact(2).take(tn).map(|c| [c[0], c[1]]).collect();
    let indices: Vec<u32> = ib.chunks_exact(4).take(inn).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let material = &doc["materials"][prim["material"].as_u64().unwrap_or(0) as usize];
    let image_of = |tex: &serde_json::Value| -> Result<Vec<u8>, IoError> {
        let t = &doc["textures"][tex.as_u64().ok_or_else(|| bad("missing texture"))? as usize];
        let img = &doc["images"][t["source"].as_u64().ok_or_else(|| bad("texture without source"))? as usize];
        Ok(view_bytes(&img["bufferView"])?.to_vec())
    };
    let base_color = image_of(&material["pbrMetallicRoughness"]["baseColorTexture"]["index"])?;
    let normal_texture = match material.get("normalTexture") {
        Some(t) => Some(image_of(&t["index"])?),
        None => None,
    };
    Ok(GlbMesh {
        positions,
        normals,
        texcoords,
        indices,
        base_color,
        normal_texture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn obj_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixtures::displaced_sphere(4, 0.1, 3);
        m.uv = Some(UvLayer {
            coords: m.positions.iter().map(|p| Vec2::new(p.x.abs() / 3.0, (p.y + 1.0) / 7.0)).collect(),
            faces: m.faces.clone(),
        });
        let path = dir.path().join("m.obj");
        write_obj(&path, &m, Some("m.mtl")).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.positions, m.positions);
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.uv, m.uv);
    }

    #[test]
    fn obj_polygons_and_negative_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.obj");
        fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n").unwrap();
        let m = read_obj(&path).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(m.uv.is_none());
        fs::write(&path, "v 0 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(read_obj(&path), Err(IoError::Parse { line: 2, .. })));
    }

    #[test]
    fn raster_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster {
            width: 3,
            height: 2,
            channels: 1,
            data: vec![0.0, 1.5, f32::INFINITY, -2.0, 3.25, 1e-30],
        };
        let p = dir.path().join("r.raw");
        write_raster(&p, &r).unwrap();
        assert_eq!(read_raster(&p).unwrap(), r);
        assert!(read_raster_u32(&p).is_err());
    }

    #[test]
    fn glb_round_trip() {
        let png = encode_png_rgb8(2, 1, &[[255, 0, 0], [0, 0, 255]]).unwrap();
        let m = GlbMesh {
            positions: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]],
            normals: vec![[0.0, 0.0, 1.0]; 3],
            texcoords: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            indices: vec![0, 1, 2],
            base_color: png.clone(),
            normal_texture: Some(png),
        };
        let bytes = encode_glb(&m).unwrap();
        assert_eq!(bytes.len() % 4, 0);
        assert_eq!(decode_glb(&bytes).unwrap(), m);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let data = vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]];
        write_png_rgb8(&p, 2, 2, &data).unwrap();
        assert_eq!(read_png_rgb8(&p).unwrap(), (2, 2, data.clone()));
        assert_eq!(flip_rows(&data, 2), vec![[7, 8, 9], [10, 11, 12], [1, 2, 3], [4, 5, 6]]);
    }
}
