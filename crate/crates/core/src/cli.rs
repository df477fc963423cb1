//! Command-line front end. Exit codes: 0 success, 2 invalid arguments or
//! inputs, 3 a stage failed.
//!
//! Every subcommand accepts `--json`: alone it prints a JSON summary to
//! stdout instead of text, with a path it writes the summary there.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bake::{bake_normal_map, BakeParams, NormalMap};
use crate::io;
use crate::mesh::TriangleMesh;
use crate::metrics::{evaluate, MetricParams};
use crate::pipeline::{self, ColorSource, PipelineConfig, PipelineError, PipelineInputs, RunOptions, VisibilityMethod};
use crate::render::{render_geometry, standard_cameras, STANDARD_VIEW_NAMES};
use crate::signfield::{make_watertight, SignParams};
use crate::simplify::{simplify, Placement, SimplifyOptions};
use crate::texfuse::{fuse, FuseParams};
use crate::uv::{unwrap, UnwrapParams};
use crate::visibility::{cull_hidden, RayMethod, VisibilityParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_STAGE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Stage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Stage(_) => EXIT_STAGE,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn stage(e: impl std::fmt::Display) -> CliError {
    CliError::Stage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "asset-forge", version, about = "Geometry and texture post-processing for generated 3D assets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// `--json` with an optional output path.
#[derive(Debug, Clone, clap::Args)]
pub struct JsonOut {
    /// Print a JSON summary (to stdout, or to PATH when given).
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "-")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Optimal,
    Midpoint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RayArg {
    Raster,
    Bvh,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rebuild a closed, consistently oriented surface from a raw mesh.
    Watertight {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        res: usize,
        /// Surface band half-width in voxels.
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[arg(long, default_value_t = 2)]
        dilate: usize,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Edge-collapse simplification to a target face count.
    Simplify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 23_000)]
        faces: usize,
        #[arg(long, value_enum, default_value = "optimal")]
        placement: PlacementArg,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Remove faces no outside viewpoint can see.
    CullHidden {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        views: usize,
        #[arg(long, default_value_t = 512)]
        res: usize,
        #[arg(long = "cos-thresh", default_value_t = 0.5, allow_negative_numbers = true)]
        cos_thresh: f64,
        #[arg(long, value_enum, default_value = "raster")]
        method: RayArg,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Segment, parameterize, and pack a UV atlas.
    Unwrap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "atlas-res", default_value_t = 1024)]
        atlas_res: usize,
        #[arg(long, default_value_t = 8)]
        partitions: usize,
        #[arg(long, default_value_t = 3)]
        halo: usize,
        #[arg(long, default_value_t = 4)]
        padding: usize,
        /// Serial segmentation (partitions = 1).
        #[arg(long)]
        serial: bool,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Bake a tangent-space normal map from a dense mesh onto an unwrapped one.
    Bake {
        #[arg(long)]
        lo: PathBuf,
        #[arg(long)]
        hi: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1024)]
        res: usize,
        /// Search distance as a percentage of the dense mesh's box diagonal.
        #[arg(long = "dist-pct", default_value_t = 1.0)]
        dist_pct: f64,
        #[arg(long, default_value_t = 4)]
        dilation: usize,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Render position, normal, and depth maps for the ten standard views.
    RenderConditions {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 512)]
        res: usize,
        /// Rescale the mesh into the radius-0.5 sphere first.
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Fuse view images into a UV atlas.
    Fuse {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        views: PathBuf,
        /// Directory with `view{k}.png`.
        #[arg(long)]
        colors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "atlas-res", default_value_t = 2048)]
        atlas_res: usize,
        #[arg(long, default_value_t = 4.0)]
        alpha: f64,
        /// Texels of color pushed past chart borders.
        #[arg(long, default_value_t = 4)]
        dilate: usize,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Chamfer, Hausdorff, flipped normals, and normal angular errors.
    Metrics {
        /// Simplified or low-poly mesh.
        #[arg(long)]
        a: PathBuf,
        /// Reference mesh.
        #[arg(long)]
        b: PathBuf,
        /// Baked map for `a`; enables the baked angular error.
        #[arg(long = "normal-map")]
        normal_map: Option<PathBuf>,
        #[arg(long, default_value_t = 256_000)]
        samples: usize,
        #[arg(long = "angular-samples", default_value_t = 10_000)]
        angular_samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Views for the flipped-normal count; 0 skips it.
        #[arg(long = "flip-views", default_value_t = 24)]
        flip_views: usize,
        #[arg(long = "flip-res", default_value_t = 1024)]
        flip_res: usize,
        /// Measure in the input units instead of the shared unit cube.
        #[arg(long = "no-normalize")]
        no_normalize: bool,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Run every stage from a dense mesh and ten view images to an asset.
    Pipeline {
        #[arg(long)]
        mesh: PathBuf,
        /// Directory with `view{k}.png` for the ten standard cameras.
        #[arg(long)]
        colors: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        /// JSON config; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the 1K-atlas operating point.
        #[arg(long)]
        flash: bool,
        /// Run stages one after another.
        #[arg(long)]
        serial: bool,
        #[arg(long = "target-faces")]
        target_faces: Option<usize>,
        #[arg(long = "atlas-res")]
        atlas_res: Option<usize>,
        #[arg(long = "view-res")]
        view_res: Option<usize>,
        /// Rebuild the dense mesh as a closed manifold first.
        #[arg(long)]
        watertight: bool,
        /// Also time the cumulative optimization ladder (median of 5 runs per step).
        #[arg(long)]
        ladder: bool,
        /// Write intermediates to this directory.
        #[arg(long)]
        spill: Option<PathBuf>,
        #[command(flatten)]
        json: JsonOut,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_mesh(path: &Path) -> Result<TriangleMesh, CliError> {
    let m = io::read_obj(path).map_err(invalid)?;
    if m.is_empty() {
        return Err(CliError::Invalid(format!("{}: no faces", path.display())));
    }
    if m.has_non_finite() {
        return Err(CliError::Invalid(format!("{}: non-finite vertex coordinates", path.display())));
    }
    Ok(m)
}

fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(stage)?;
    }
    io::write_obj(path, mesh, None).map_err(stage)
}

fn require(ok: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Invalid(msg.into()))
    }
}

// A closed stdout (e.g. piped into `head`) is not an error.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn emit(out: &JsonOut, value: Value, text: String) -> Result<(), CliError> {
    let pretty = serde_json::to_string_pretty(&value).expect("json");
    match &out.json {
        None => say(&text),
        Some(p) if p.as_os_str() == "-" => say(&pretty),
        Some(p) => {
            std::fs::write(p, pretty).map_err(stage)?;
            say(&text);
        }
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    let t0 = Instant::now();
    match cmd {
        Command::Watertight { input, out, res, band, dilate, json } => {
            require(res >= 8, "--res must be at least 8")?;
            require(band > 0.0, "--band must be positive")?;
            let mesh = read_mesh(&input)?;
            let params = SignParams {
                resolution: res,
                band_voxels: band,
                dilate_radius: dilate,
                ..SignParams::default()
            };
            let w = make_watertight(&mesh, &params).map_err(stage)?;
            write_mesh(&out, &w.mesh)?;
            let report = w.mesh.manifold_report();
            emit(
                &json,
                json!({
                    "command": "watertight",
                    "input_faces": mesh.face_count(),
                    "output_faces": w.mesh.face_count(),
                    "closed_manifold": report.is_closed_manifold(),
                    "reopened_components": w.grid.diagnostics.reopened_components,
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("watertight: {} -> {} faces, closed manifold: {}", mesh.face_count(), w.mesh.face_count(), report.is_closed_manifold()),
            )
        }
        Command::Simplify { input, out, faces, placement, json } => {
            let mesh = read_mesh(&input)?;
            let placement = match placement {
                PlacementArg::Optimal => Placement::Optimal,
                PlacementArg::Midpoint => Placement::Midpoint,
            };
            let (m, r) = simplify(&mesh, &SimplifyOptions::new(faces, placement)).map_err(invalid)?;
            write_mesh(&out, &m)?;
            emit(
                &json,
                json!({
                    "command": "simplify",
                    "input_faces": mesh.face_count(),
                    "output_faces": m.face_count(),
                    "rounds": r.rounds,
                    "collapses": r.collapses,
                    "target_reached": r.target_reached,
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("simplify: {} -> {} faces in {} rounds", mesh.face_count(), m.face_count(), r.rounds),
            )
        }
        Command::CullHidden { input, out, views, res, cos_thresh, method, json } => {
            require(views > 0, "--views must be positive")?;
            require(res > 0, "--res must be positive")?;
            require((-1.0..=1.0).contains(&cos_thresh), "--cos-thresh must be in [-1, 1]")?;
            let mesh = read_mesh(&input)?;
            let params = VisibilityParams {
                viewpoints: views,
                resolution: res,
                cos_threshold: cos_thresh,
                method: match method {
                    RayArg::Raster => RayMethod::Raster,
                    RayArg::Bvh => RayMethod::Bvh,
                },
            };
            let (m, _) = cull_hidden(&mesh, &params).map_err(stage)?;
            write_mesh(&out, &m)?;
            emit(
                &json,
                json!({
                    "command": "cull-hidden",
                    "input_faces": mesh.face_count(),
                    "output_faces": m.face_count(),
                    "removed": mesh.face_count() - m.face_count(),
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("cull-hidden: removed {} of {} faces", mesh.face_count() - m.face_count(), mesh.face_count()),
            )
        }
        Command::Unwrap { input, out, atlas_res, partitions, halo, padding, serial, json } => {
            require(partitions > 0, "--partitions must be at least 1")?;
            require(atlas_res > 2 * padding, "--atlas-res must exceed twice the padding")?;
            let mesh = read_mesh(&input)?;
            let params = UnwrapParams {
                partitions: if serial { 1 } else { partitions },
                halo_rings: halo,
                atlas_resolution: atlas_res,
                padding,
                ..UnwrapParams::default()
            };
            let u = unwrap(&mesh, &params).map_err(stage)?;
            write_mesh(&out, &u.mesh)?;
            emit(
                &json,
                json!({
                    "command": "unwrap",
                    "faces": mesh.face_count(),
                    "charts": u.charts.len(),
                    "occupancy": u.occupancy(),
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("unwrap: {} charts, occupancy {:.3}", u.charts.len(), u.occupancy()),
            )
        }
        Command::Bake { lo, hi, out, res, dist_pct, dilation, json } => {
            require(res > 0, "--res must be positive")?;
            require(dist_pct > 0.0, "--dist-pct must be positive")?;
            let lo = read_mesh(&lo)?;
            require(lo.uv.is_some(), "--lo mesh has no texture coordinates")?;
            let hi = read_mesh(&hi)?;
            let params = BakeParams {
                resolution: res,
                max_distance_fraction: dist_pct / 100.0,
                dilation,
            };
            let b = bake_normal_map(&lo, &hi, &params).map_err(stage)?;
            io::write_png_rgb8(&out, res, res, &b.map.data).map_err(stage)?;
            emit(
                &json,
                json!({
                    "command": "bake",
                    "resolution": res,
                    "valid_texels": b.gbuffer.valid_count(),
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("bake: {res}² map, {} texels covered", b.gbuffer.valid_count()),
            )
        }
        Command::RenderConditions { input, out_dir, res, normalize, json } => {
            require(res > 0, "--res must be positive")?;
            let mut mesh = read_mesh(&input)?;
            if normalize {
                pipeline::normalize_input(&mut mesh);
            }
            let set = render_geometry(&mesh, &standard_cameras(res));
            io::write_views(&out_dir, &set.views, &STANDARD_VIEW_NAMES).map_err(stage)?;
            let covered: Vec<usize> = set.views.iter().map(|v| v.depth.iter().filter(|d| d.is_finite()).count()).collect();
            emit(
                &json,
                json!({
                    "command": "render-conditions",
                    "views": set.views.len(),
                    "resolution": res,
                    "foreground_pixels": covered,
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("render-conditions: {} views at {res}px", set.views.len()),
            )
        }
        Command::Fuse { mesh, views, colors, out, atlas_res, alpha, dilate, json } => {
            require(atlas_res > 0, "--atlas-res must be positive")?;
            require(alpha > 0.0, "--alpha must be positive")?;
            let mesh = read_mesh(&mesh)?;
            require(mesh.uv.is_some(), "--mesh has no texture coordinates")?;
            let views = io::read_views(&views).map_err(invalid)?;
            require(views.len() == STANDARD_VIEW_NAMES.len(), format!("{} views, expected {}", views.len(), STANDARD_VIEW_NAMES.len()))?;
            let images = (0..views.len())
                .map(|k| io::read_color_png(&colors.join(format!("view{k}.png"))).map_err(invalid))
                .collect::<Result<Vec<_>, _>>()?;
            let params = FuseParams {
                atlas_resolution: atlas_res,
                alpha,
                ..FuseParams::default()
            };
            let atlas = fuse(&mesh, &views, &images, &params).map_err(stage)?;
            io::write_color_png(&out, &atlas.dilated(dilate)).map_err(stage)?;
            let filled = atlas.filled.iter().filter(|&&f| f).count();
            emit(
                &json,
                json!({
                    "command": "fuse",
                    "atlas_resolution": atlas_res,
                    "chart_texels": atlas.geometry.valid_count(),
                    "filled_texels": filled,
                    "seconds": t0.elapsed().as_secs_f64(),
                }),
                format!("fuse: {filled} texels filled in a {atlas_res}² atlas"),
            )
        }
        Command::Metrics {
            a,
            b,
            normal_map,
            samples,
            angular_samples,
            seed,
            flip_views,
            flip_res,
            no_normalize,
            json,
        } => {
            require(samples > 0 && angular_samples > 0, "sample counts must be positive")?;
            let a = read_mesh(&a)?;
            let b = read_mesh(&b)?;
            let map = match normal_map {
                Some(p) => {
                    require(a.uv.is_some(), "--normal-map needs texture coordinates on --a")?;
                    let (w, h, data) = io::read_png_rgb8(&p).map_err(invalid)?;
                    require(w == h, format!("{}: normal map must be square", p.display()))?;
                    Some(NormalMap { resolution: w, data })
                }
                None => None,
            };
            let params = MetricParams {
                samples,
                angular_samples,
                seed,
                normalize: !no_normalize,
                flip_views,
                flip_resolution: flip_res,
            };
            let r = evaluate(&a, &b, map.as_ref(), &params).map_err(stage)?;
            let text = format!(
                "chamfer {:.6e}  hausdorff {:.6e}  flipped {}  baked {}  geo {:.3}°",
                r.chamfer,
                r.hausdorff,
                r.flipped_pixels.map_or("-".into(), |v| v.to_string()),
                r.baked_mean_deg.map_or("-".into(), |v| format!("{v:.3}°")),
                r.geo_mean_deg
            );
            emit(&json, serde_json::to_value(&r).expect("json"), text)
        }
        Command::Pipeline {
            mesh,
            colors,
            out_dir,
            config,
            flash,
            serial,
            target_faces,
            atlas_res,
            view_res,
            watertight,
            ladder,
            spill,
            json,
        } => {
            let mut cfg = match &config {
                Some(p) => pipeline::load_config(p).map_err(invalid)?,
                None => PipelineConfig::default(),
            };
            // flags win over the file
            if flash {
                cfg.operating_point = pipeline::OperatingPoint::Flash;
            }
            if serial {
                cfg.overlap = false;
            }
            if watertight {
                cfg.watertight = true;
            }
            if let Some(v) = target_faces {
                cfg.target_faces = v;
            }
            if let Some(v) = atlas_res {
                cfg.atlas_resolution = Some(v);
            }
            if let Some(v) = view_res {
                cfg.view_resolution = v;
            }
            cfg.validate().map_err(invalid)?;
            let mut dense = read_mesh(&mesh)?;
            pipeline::normalize_input(&mut dense);
            let inputs = PipelineInputs {
                dense,
                colors: ColorSource::from_dir(&colors),
            };
            let classify = |e: PipelineError| match e {
                PipelineError::InvalidConfig(_) => invalid(e),
                PipelineError::Stage { .. } => stage(e),
            };
            let options = RunOptions { spill };
            let mut report = pipeline::run_pipeline(&cfg, &inputs, &out_dir, &options).map_err(classify)?;
            if ladder {
                report.ladder = Some(pipeline::run_ladder(&cfg, &inputs, &out_dir, 5).map_err(classify)?);
            }
            let mut text = format!(
                "pipeline: {} -> {} faces, {} charts, {}² atlas\n  critical path {:.3}s, sum of stages {:.3}s\n  {}",
                report.input_faces,
                report.culled_faces,
                report.charts,
                report.atlas_resolution,
                report.timing.critical_path,
                report.timing.sum_of_stages,
                report.glb.display()
            );
            for s in &report.timing.stages {
                text.push_str(&format!("\n  {:<18} {:8.3}s", s.name, s.seconds));
            }
            if let Some(rows) = &report.ladder {
                for r in rows {
                    text.push_str(&format!("\n  ladder {:<20} {:8.3}s", r.step, r.critical_path));
                }
            }
            emit(&json, pipeline::timing_report(&report), text)
        }
    }
}

impl From<VisibilityMethod> for RayMethod {
    fn from(m: VisibilityMethod) -> Self {
        match m {
            VisibilityMethod::Raster => RayMethod::Raster,
            VisibilityMethod::Bvh => RayMethod::Bvh,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(run(["asset-forge", "simplify"]), EXIT_INVALID);
        assert_eq!(run(["asset-forge", "nonsense"]), EXIT_INVALID);
        assert_eq!(run(["asset-forge", "simplify", "--in", "/nonexistent.obj", "--out", "/tmp/x.obj"]), EXIT_INVALID);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(["asset-forge", "--help"]), EXIT_OK);
    }
}
