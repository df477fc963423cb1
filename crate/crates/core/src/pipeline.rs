//! Configuration, stage graph, and timing for the full pipeline.
//!
//! Stages form a DAG. Each stage reads finished outputs of its dependencies
//! and writes one output of its own, so any schedule that respects the
//! edges produces the same bytes. With overlap on, independent stages run
//! on their own threads: view rendering runs beside unwrap and bake, and
//! color decoding runs beside everything up to fusion.
//!
//! ```text
//! watertight? -> simplify -> cull_hidden -> unwrap -> bake ------------------+
//!                                     |        \                             |
//!                                     +-> render_conditions -> fusion_prep   |
//!                                                                  |         v
//!                              decode_images ------------------> fuse -> export
//! ```
//!
//! Timings use the monotonic clock. The critical path is the longest chain
//! of measured stage durations along the edges that were actually waited on
//! (in serial mode every stage also waits on the one before it).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bake::{bake_normal_map, BakeOutput, BakeParams};
use crate::io;
use crate::mesh::TriangleMesh;
use crate::render::{render_geometry, standard_cameras, ColorImage, ViewSet, STANDARD_VIEW_NAMES};
use crate::signfield::{make_watertight, SignParams};
use crate::simplify::{simplify, Placement, SimplifyOptions};
use crate::texfuse::{export_asset, ExportedAsset, FuseParams, FusionPrep, InpaintParams, SampleParams, TextureAtlas, STANDARD_PRIORS};
use crate::uv::{unwrap, SegmentParams, UnwrapParams, Unwrapped};
use crate::visibility::{cull_hidden, RayMethod, VisibilityParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
    #[error("stage {stage} failed: {message}")]
    Stage {
        stage: String,
        message: String,
        /// Stages that finished before the failure.
        timings: Vec<StageRecord>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatingPoint {
    #[default]
    Default,
    /// Lower-latency preset: 1K atlas.
    Flash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisibilityMethod {
    #[default]
    Raster,
    Bvh,
}

/// Every tunable of every stage. Missing JSON fields take the defaults;
/// unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub operating_point: OperatingPoint,
    pub target_faces: usize,
    pub placement: Placement,
    /// Rebuild the dense mesh as a closed manifold before simplifying.
    pub watertight: bool,
    pub watertight_resolution: usize,
    pub visibility_views: usize,
    pub visibility_resolution: usize,
    pub visibility_cos_threshold: f64,
    pub visibility_method: VisibilityMethod,
    /// 1 runs the serial chart segmentation.
    pub uv_partitions: usize,
    pub uv_halo_rings: usize,
    pub uv_padding: usize,
    /// Overrides the operating point's atlas size.
    pub atlas_resolution: Option<usize>,
    /// Defaults to the atlas size.
    pub normal_map_resolution: Option<usize>,
    pub bake_distance_pct: f64,
    pub bake_dilation: usize,
    pub view_resolution: usize,
    pub fuse_alpha: f64,
    pub fuse_epsilon: f64,
    pub edge_threshold: f64,
    pub depth_tolerance: f64,
    pub inpaint_neighbors: usize,
    pub inpaint_sigma: f64,
    pub inpaint_gamma: f64,
    /// Texels of color pushed past chart borders in the exported atlas.
    pub atlas_dilation: usize,
    /// Run independent stages concurrently.
    pub overlap: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            operating_point: OperatingPoint::Default,
            target_faces: 23_000,
            placement: Placement::Optimal,
            watertight: false,
            watertight_resolution: 128,
            visibility_views: 64,
            visibility_resolution: 512,
            visibility_cos_threshold: 0.5,
            visibility_method: VisibilityMethod::Raster,
            uv_partitions: 8,
            uv_halo_rings: 3,
            uv_padding: 4,
            atlas_resolution: None,
            normal_map_resolution: None,
            bake_distance_pct: 1.0,
            bake_dilation: 4,
            view_resolution: 512,
            fuse_alpha: 4.0,
            fuse_epsilon: 1e-8,
            edge_threshold: 0.02,
            depth_tolerance: 0.005,
            inpaint_neighbors: 16,
            inpaint_sigma: 0.02,
            inpaint_gamma: 2.0,
            atlas_dilation: 4,
            overlap: true,
        }
    }
}

const MAX_RESOLUTION: usize = 16_384;

impl PipelineConfig {
    pub fn flash() -> Self {
        Self {
            operating_point: OperatingPoint::Flash,
            ..Self::default()
        }
    }

    pub fn atlas_size(&self) -> usize {
        self.atlas_resolution.unwrap_or(match self.operating_point {
            OperatingPoint::Default => 2048,
            OperatingPoint::Flash => 1024,
        })
    }

    pub fn normal_map_size(&self) -> usize {
        self.normal_map_resolution.unwrap_or_else(|| self.atlas_size())
    }

    /// All problems at once, so nothing fails halfway through a run.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut errs = Vec::new();
        let mut res = |name: &str, v: usize| {
            if v == 0 || v > MAX_RESOLUTION {
                errs.push(format!("{name} = {v} must be in 1..={MAX_RESOLUTION}"));
            }
        };
        res("watertight_resolution", self.watertight_resolution);
        res("visibility_resolution", self.visibility_resolution);
        res("atlas_resolution", self.atlas_size());
        res("normal_map_resolution", self.normal_map_size());
        res("view_resolution", self.view_resolution);
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        check(self.target_faces >= 4, format!("target_faces = {} must be at least 4", self.target_faces));
        check(self.visibility_views > 0, "visibility_views must be positive".into());
        check(
            (-1.0..=1.0).contains(&self.visibility_cos_threshold),
            format!("visibility_cos_threshold = {} must be in [-1, 1]", self.visibility_cos_threshold),
        );
        check(self.uv_partitions > 0, "uv_partitions must be at least 1".into());
        check(
            self.atlas_size() > 2 * self.uv_padding,
            format!("atlas_resolution {} leaves no room inside uv_padding {}", self.atlas_size(), self.uv_padding),
        );
        let positive = |v: f64| v.is_finite() && v > 0.0;
        check(positive(self.bake_distance_pct), format!("bake_distance_pct = {} must be positive", self.bake_distance_pct));
        check(positive(self.fuse_alpha), format!("fuse_alpha = {} must be positive", self.fuse_alpha));
        check(positive(self.fuse_epsilon), format!("fuse_epsilon = {} must be positive", self.fuse_epsilon));
        check(positive(self.edge_threshold), format!("edge_threshold = {} must be positive", self.edge_threshold));
        check(positive(self.depth_tolerance), format!("depth_tolerance = {} must be positive", self.depth_tolerance));
        check(self.inpaint_neighbors > 0, "inpaint_neighbors must be positive".into());
        check(positive(self.inpaint_sigma), format!("inpaint_sigma = {} must be positive", self.inpaint_sigma));
        check(self.inpaint_gamma.is_finite() && self.inpaint_gamma >= 0.0, format!("inpaint_gamma = {} must be non-negative", self.inpaint_gamma));
        if errs.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::InvalidConfig(errs))
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn visibility(&self) -> VisibilityParams {
        VisibilityParams {
            viewpoints: self.visibility_views,
            resolution: self.visibility_resolution,
            cos_threshold: self.visibility_cos_threshold,
            method: match self.visibility_method {
                VisibilityMethod::Raster => RayMethod::Raster,
                VisibilityMethod::Bvh => RayMethod::Bvh,
            },
        }
    }

    fn unwrap_params(&self) -> UnwrapParams {
        UnwrapParams {
            segment: SegmentParams::default(),
            partitions: self.uv_partitions,
            halo_rings: self.uv_halo_rings,
            atlas_resolution: self.atlas_size(),
            padding: self.uv_padding,
        }
    }

    fn bake_params(&self) -> BakeParams {
        BakeParams {
            resolution: self.normal_map_size(),
            max_distance_fraction: self.bake_distance_pct / 100.0,
            dilation: self.bake_dilation,
        }
    }

    fn fuse_params(&self) -> FuseParams {
        FuseParams {
            atlas_resolution: self.atlas_size(),
            alpha: self.fuse_alpha,
            epsilon: self.fuse_epsilon,
            priors: STANDARD_PRIORS.to_vec(),
            edge_threshold: self.edge_threshold,
            depth_tolerance: self.depth_tolerance,
            sampling: SampleParams::default(),
            inpaint: InpaintParams {
                neighbors: self.inpaint_neighbors,
                sigma_fraction: self.inpaint_sigma,
                gamma: self.inpaint_gamma,
            },
        }
    }
}

// ---------------------------------------------------------------- scheduler

/// Index of a stage in its graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageId(usize);

type StageFn<'a> = Box<dyn FnOnce() -> Result<(), String> + Send + 'a>;

struct Node<'a> {
    name: String,
    deps: Vec<usize>,
    run: StageFn<'a>,
}

/// Stages with declared dependencies. A stage may only depend on stages
/// added before it, so insertion order is a topological order.
#[derive(Default)]
pub struct StageGraph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Measured execution of one stage, in seconds from the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub deps: Vec<String>,
    pub start: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stages: Vec<StageRecord>,
    pub critical_path: f64,
    pub sum_of_stages: f64,
    pub wall_clock: f64,
    pub overlap: bool,
}

impl StageTiming {
    /// Longest chain of stage durations over the edges each stage waited on.
    fn from_records(stages: Vec<StageRecord>, overlap: bool, wall_clock: f64) -> Self {
        let index: BTreeMap<&str, usize> = stages.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        let mut finish = vec![0.0f64; stages.len()];
        for (i, s) in stages.iter().enumerate() {
            let mut ready = s.deps.iter().filter_map(|d| index.get(d.as_str())).map(|&d| finish[d]).fold(0.0, f64::max);
            if !overlap && i > 0 {
                ready = ready.max(finish[i - 1]);
            }
            finish[i] = ready + s.seconds;
        }
        Self {
            critical_path: finish.iter().copied().fold(0.0, f64::max),
            sum_of_stages: stages.iter().map(|s| s.seconds).sum(),
            stages,
            wall_clock,
            overlap,
        }
    }

    pub fn stage_seconds(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|s| s.name == name).map(|s| s.seconds)
    }
}

impl<'a> StageGraph<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add(&mut self, name: &str, deps: &[StageId], run: impl FnOnce() -> Result<(), String> + Send + 'a) -> StageId {
        let id = self.nodes.len();
        assert!(deps.iter().all(|d| d.0 < id), "stage {name} depends on a later stage");
        self.nodes.push(Node {
            name: name.to_string(),
            deps: deps.iter().map(|d| d.0).collect(),
            run: Box::new(run),
        });
        StageId(id)
    }

    /// Runs every stage once. Records come back in insertion order.
    pub fn run(self, overlap: bool) -> Result<StageTiming, PipelineError> {
        let t0 = Instant::now();
        let names: Vec<String> = self.nodes.iter().map(|n| n.name.clone()).collect();
        let deps: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.deps.clone()).collect();
        let record = |i: usize, start: f64, seconds: f64| StageRecord {
            name: names[i].clone(),
            deps: deps[i].iter().map(|&d| names[d].clone()).collect(),
            start,
            seconds,
        };
        let mut records: Vec<Option<StageRecord>> = vec![None; names.len()];
        let mut failure: Option<(usize, String)> = None;
        let mut runs: Vec<Option<StageFn<'a>>> = self.nodes.into_iter().map(|n| Some(n.run)).collect();

        if !overlap {
            for i in 0..runs.len() {
                let start = t0.elapsed().as_secs_f64();
                let result = (runs[i].take().expect("runs once"))();
                let end = t0.elapsed().as_secs_f64();
                if let Err(e) = result {
                    failure = Some((i, e));
                    break;
                }
                records[i] = Some(record(i, start, end - start));
            }
        } else {
            std::thread::scope(|scope| {
                let (tx, rx) = mpsc::channel::<(usize, f64, f64, Result<(), String>)>();
                let mut started = vec![false; runs.len()];
                let mut done = vec![false; runs.len()];
                let mut running = 0usize;
                loop {
                    if failure.is_none() {
                        for i in 0..runs.len() {
                            if !started[i] && deps[i].iter().all(|&d| done[d]) {
                                started[i] = true;
                                running += 1;
                                let f = runs[i].take().expect("runs once");
                                let tx = tx.clone();
                                scope.spawn(move || {
                                    let start = t0.elapsed().as_secs_f64();
                                    let r = f();
                                    let end = t0.elapsed().as_secs_f64();
                                    // the receiver outlives every sender in this scope
                                    let _ = tx.send((i, start, end, r));
                                });
                            }
                        }
                    }
                    if running == 0 {
                        break;
                    }
                    let (i, start, end, r) = rx.recv().expect("a stage is running");
                    running -= 1;
                    match r {
                        Ok(()) => {
                            done[i] = true;
                            records[i] = Some(record(i, start, end - start));
                        }
                        Err(e) => {
                            failure.get_or_insert((i, e));
                        }
                    }
                }
            });
        }
        let wall = t0.elapsed().as_secs_f64();
        let finished: Vec<StageRecord> = records.into_iter().flatten().collect();
        if let Some((i, message)) = failure {
            return Err(PipelineError::Stage {
                stage: names[i].clone(),
                message,
                timings: finished,
            });
        }
        Ok(StageTiming::from_records(finished, overlap, wall))
    }
}

// ---------------------------------------------------------------- pipeline

/// View images, one per standard camera.
#[derive(Debug, Clone)]
pub enum ColorSource {
    /// PNG files, decoded inside the pipeline.
    Files(Vec<PathBuf>),
    /// PNG bytes, decoded inside the pipeline.
    Encoded(Vec<Vec<u8>>),
    Decoded(Vec<ColorImage>),
}

impl ColorSource {
    pub fn len(&self) -> usize {
        match self {
            ColorSource::Files(v) => v.len(),
            ColorSource::Encoded(v) => v.len(),
            ColorSource::Decoded(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `view{k}.png` for every standard camera.
    pub fn from_dir(dir: &Path) -> Self {
        ColorSource::Files((0..STANDARD_VIEW_NAMES.len()).map(|k| dir.join(format!("view{k}.png"))).collect())
    }

    fn decode(&self) -> Result<Vec<ColorImage>, String> {
        match self {
            ColorSource::Files(paths) => paths.iter().map(|p| io::read_color_png(p).map_err(|e| format!("{}: {e}", p.display()))).collect(),
            ColorSource::Encoded(bytes) => bytes
                .iter()
                .map(|b| {
                    let img = image::load_from_memory(b).map_err(|e| e.to_string())?.to_rgb8();
                    let data: Vec<[u8; 3]> = img.pixels().map(|p| p.0).collect();
                    Ok(ColorImage::from_rgb8(img.width() as usize, img.height() as usize, &data))
                })
                .collect(),
            ColorSource::Decoded(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    /// Dense mesh in the normalized frame of the view images (bounding
    /// sphere of radius 0.5 about the origin; see [`normalize_input`]).
    pub dense: TriangleMesh,
    pub colors: ColorSource,
}

/// Moves a mesh into the frame the standard cameras expect.
pub fn normalize_input(mesh: &mut TriangleMesh) {
    mesh.normalize_to_sphere(0.5);
}

/// Where outputs go besides the final asset.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write every intermediate to this directory.
    pub spill: Option<PathBuf>,
}

/// Non-timing results plus timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub operating_point: OperatingPoint,
    pub input_faces: usize,
    pub simplified_faces: usize,
    pub culled_faces: usize,
    pub charts: usize,
    pub atlas_resolution: usize,
    pub glb: PathBuf,
    pub obj: PathBuf,
    pub timing: StageTiming,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<LadderRow>>,
}

/// One cumulative optimization step of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub step: String,
    /// Median over the repeats.
    pub critical_path: f64,
    pub sum_of_stages: f64,
    pub runs: usize,
}

fn spill_mesh(dir: &Option<PathBuf>, name: &str, mesh: &TriangleMesh) -> Result<(), String> {
    match dir {
        Some(d) => io::write_obj(&d.join(format!("{name}.obj")), mesh, None).map_err(|e| e.to_string()),
        None => Ok(()),
    }
}

/// Runs every stage and writes `asset.glb`, `asset.obj`, and textures to
/// `out_dir`.
pub fn run_pipeline(config: &PipelineConfig, inputs: &PipelineInputs, out_dir: &Path, options: &RunOptions) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let mut errs = Vec::new();
    if inputs.dense.is_empty() {
        errs.push("input mesh has no faces".to_string());
    }
    if inputs.colors.len() != STANDARD_VIEW_NAMES.len() {
        errs.push(format!("{} color images for {} standard views", inputs.colors.len(), STANDARD_VIEW_NAMES.len()));
    }
    if let ColorSource::Files(paths) = &inputs.colors {
        errs.extend(paths.iter().filter(|p| !p.is_file()).map(|p| format!("missing color image {}", p.display())));
    }
    if !errs.is_empty() {
        return Err(PipelineError::InvalidConfig(errs));
    }
    let stage_err = |e: &dyn std::fmt::Display| e.to_string();
    let spill = options.spill.clone();
    if let Some(d) = &spill {
        fs::create_dir_all(d).map_err(|e| PipelineError::InvalidConfig(vec![format!("spill directory {}: {e}", d.display())]))?;
    }

    let watertight_out: OnceLock<TriangleMesh> = OnceLock::new();
    let simplified: OnceLock<TriangleMesh> = OnceLock::new();
    let culled: OnceLock<TriangleMesh> = OnceLock::new();
    let unwrapped: OnceLock<Unwrapped> = OnceLock::new();
    let baked: OnceLock<BakeOutput> = OnceLock::new();
    let views: OnceLock<ViewSet> = OnceLock::new();
    let colors: OnceLock<Vec<ColorImage>> = OnceLock::new();
    let prep: OnceLock<FusionPrep> = OnceLock::new();
    let atlas: OnceLock<TextureAtlas> = OnceLock::new();
    let exported: OnceLock<ExportedAsset> = OnceLock::new();
    const DEP: &str = "dependency finished";

    let mut g = StageGraph::new();
    let mut source = None;
    let sign_params = SignParams {
        resolution: config.watertight_resolution,
        ..SignParams::default()
    };
    if config.watertight {
        source = Some(g.add("watertight", &[], || {
            let w = make_watertight(&inputs.dense, &sign_params).map_err(|e| stage_err(&e))?;
            spill_mesh(&spill, "watertight", &w.mesh)?;
            let _ = watertight_out.set(w.mesh);
            Ok(())
        }));
    }
    let deps: Vec<StageId> = source.into_iter().collect();
    let s_simplify = g.add("simplify", &deps, || {
        let src = if config.watertight { watertight_out.get().expect(DEP) } else { &inputs.dense };
        let (m, _) = simplify(src, &SimplifyOptions::new(config.target_faces, config.placement)).map_err(|e| stage_err(&e))?;
        spill_mesh(&spill, "simplified", &m)?;
        let _ = simplified.set(m);
        Ok(())
    });
    let s_cull = g.add("cull_hidden", &[s_simplify], || {
        let (m, _) = cull_hidden(simplified.get().expect(DEP), &config.visibility()).map_err(|e| stage_err(&e))?;
        spill_mesh(&spill, "culled", &m)?;
        let _ = culled.set(m);
        Ok(())
    });
    let s_unwrap = g.add("unwrap", &[s_cull], || {
        let u = unwrap(culled.get().expect(DEP), &config.unwrap_params()).map_err(|e| stage_err(&e))?;
        spill_mesh(&spill, "unwrapped", &u.mesh)?;
        let _ = unwrapped.set(u);
        Ok(())
    });
    let s_bake = g.add("bake", &[s_unwrap], || {
        let hi = if config.watertight { watertight_out.get().expect(DEP) } else { &inputs.dense };
        let b = bake_normal_map(&unwrapped.get().expect(DEP).mesh, hi, &config.bake_params()).map_err(|e| stage_err(&e))?;
        if let Some(d) = &spill {
            let n = b.map.resolution;
            io::write_png_rgb8(&d.join("normal.png"), n, n, &b.map.data).map_err(|e| stage_err(&e))?;
        }
        let _ = baked.set(b);
        Ok(())
    });
    let s_render = g.add("render_conditions", &[s_cull], || {
        let v = render_geometry(culled.get().expect(DEP), &standard_cameras(config.view_resolution));
        if let Some(d) = &spill {
            io::write_views(&d.join("views"), &v.views, &STANDARD_VIEW_NAMES).map_err(|e| stage_err(&e))?;
        }
        let _ = views.set(v);
        Ok(())
    });
    let s_decode = g.add("decode_images", &[], || {
        let _ = colors.set(inputs.colors.decode()?);
        Ok(())
    });
    let s_prep = g.add("fusion_prep", &[s_unwrap, s_render], || {
        let p = FusionPrep::new(&unwrapped.get().expect(DEP).mesh, &views.get().expect(DEP).views, &config.fuse_params()).map_err(|e| stage_err(&e))?;
        let _ = prep.set(p);
        Ok(())
    });
    let s_fuse = g.add("fuse", &[s_prep, s_decode], || {
        let a = prep.get().expect(DEP).fuse(colors.get().expect(DEP)).map_err(|e| stage_err(&e))?;
        if let Some(d) = &spill {
            io::write_color_png(&d.join("atlas_raw.png"), &a.to_image()).map_err(|e| stage_err(&e))?;
        }
        let _ = atlas.set(a);
        Ok(())
    });
    g.add("export", &[s_fuse, s_bake], || {
        let a = atlas.get().expect(DEP);
        let e = export_asset(&unwrapped.get().expect(DEP).mesh, &baked.get().expect(DEP).map, &a.dilated(config.atlas_dilation), out_dir, "asset")
            .map_err(|e| stage_err(&e))?;
        let _ = exported.set(e);
        Ok(())
    });
    let timing = g.run(config.overlap)?;

    let e = exported.get().expect("pipeline finished");
    Ok(PipelineReport {
        config_hash: config.hash(),
        operating_point: config.operating_point,
        input_faces: inputs.dense.face_count(),
        simplified_faces: simplified.get().map_or(0, |m| m.face_count()),
        culled_faces: culled.get().map_or(0, |m| m.face_count()),
        charts: unwrapped.get().map_or(0, |u| u.charts.len()),
        atlas_resolution: config.atlas_size(),
        glb: e.glb.clone(),
        obj: e.obj.clone(),
        timing,
        ladder: None,
    })
}

/// Cumulative optimization steps, each starting from the previous one.
pub fn ladder_configs(base: &PipelineConfig) -> Vec<(&'static str, PipelineConfig)> {
    let mut c = PipelineConfig {
        overlap: false,
        uv_partitions: 1,
        visibility_method: VisibilityMethod::Bvh,
        ..base.clone()
    };
    let mut out = vec![("baseline", c.clone())];
    c.uv_partitions = base.uv_partitions.max(2);
    out.push(("+parallel_uv", c.clone()));
    c.visibility_method = VisibilityMethod::Raster;
    out.push(("+raster_visibility", c.clone()));
    c.overlap = true;
    out.push(("+overlap", c));
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs each ladder step `repeats` times into `out_dir/ladder/<k>` and
/// reports median timings.
pub fn run_ladder(base: &PipelineConfig, inputs: &PipelineInputs, out_dir: &Path, repeats: usize) -> Result<Vec<LadderRow>, PipelineError> {
    let mut rows = Vec::new();
    for (k, (step, cfg)) in ladder_configs(base).into_iter().enumerate() {
        let dir = out_dir.join("ladder").join(k.to_string());
        let mut crit = Vec::new();
        let mut sums = Vec::new();
        for _ in 0..repeats.max(1) {
            let r = run_pipeline(&cfg, inputs, &dir, &RunOptions::default())?;
            crit.push(r.timing.critical_path);
            sums.push(r.timing.sum_of_stages);
        }
        rows.push(LadderRow {
            step: step.to_string(),
            critical_path: median(crit),
            sum_of_stages: median(sums),
            runs: repeats.max(1),
        });
    }
    Ok(rows)
}

/// Machine-readable report.
pub fn timing_report(report: &PipelineReport) -> serde_json::Value {
    serde_json::to_value(report).expect("report serializes")
}

/// Reads a JSON config; missing fields take defaults.
pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::InvalidConfig(vec![format!("{}: {e}", path.display())]))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::InvalidConfig(vec![format!("{}: {e}", path.display())]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn empty_graph_reports_zero_stages() {
        for overlap in [false, true] {
            let t = StageGraph::new().run(overlap).unwrap();
            assert!(t.stages.is_empty());
            assert_eq!(t.critical_path, 0.0);
            assert_eq!(t.sum_of_stages, 0.0);
        }
    }

    #[test]
    fn dependencies_run_first() {
        let order = std::sync::Mutex::new(Vec::new());
        let mut g = StageGraph::new();
        let a = g.add("a", &[], || {
            order.lock().unwrap().push("a");
            Ok(())
        });
        let b = g.add("b", &[a], || {
            order.lock().unwrap().push("b");
            Ok(())
        });
        let c = g.add("c", &[], || {
            order.lock().unwrap().push("c");
            Ok(())
        });
        g.add("d", &[b, c], || {
            order.lock().unwrap().push("d");
            Ok(())
        });
        let t = g.run(true).unwrap();
        let o = order.into_inner().unwrap();
        let pos = |s| o.iter().position(|x| *x == s).unwrap();
        assert!(pos("a") < pos("b") && pos("b") < pos("d") && pos("c") < pos("d"));
        assert_eq!(t.stages.len(), 4);
        assert!(t.critical_path <= t.sum_of_stages + 1e-12);
    }

    #[test]
    fn critical_path_bounds() {
        let sleep = |ms| move || {
            std::thread::sleep(std::time::Duration::from_millis(ms));
            Ok(())
        };
        let mut g = StageGraph::new();
        let a = g.add("a", &[], sleep(30));
        g.add("b", &[], sleep(30));
        g.add("c", &[a], sleep(10));
        let t = g.run(true).unwrap();
        let max = t.stages.iter().map(|s| s.seconds).fold(0.0, f64::max);
        assert!(t.critical_path >= max && t.critical_path < t.sum_of_stages);

        let mut g = StageGraph::new();
        g.add("a", &[], sleep(10));
        g.add("b", &[], sleep(10));
        let t = g.run(false).unwrap();
        assert!((t.critical_path - t.sum_of_stages).abs() < 1e-12);
    }

    #[test]
    fn failure_names_stage_and_stops_dependents() {
        let ran = AtomicUsize::new(0);
        let mut g = StageGraph::new();
        let a = g.add("ok", &[], || Ok(()));
        let b = g.add("broken", &[a], || Err("boom".into()));
        g.add("after", &[b], || {
            ran.fetch_add(1, Ordering::SeqCst);
            Ok(())
        });
        match g.run(true) {
            Err(PipelineError::Stage { stage, message, timings }) => {
                assert_eq!(stage, "broken");
                assert_eq!(message, "boom");
                assert_eq!(timings.len(), 1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ran.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn config_validation_reports_everything() {
        let c = PipelineConfig {
            target_faces: 2,
            fuse_alpha: -1.0,
            view_resolution: 0,
            ..PipelineConfig::default()
        };
        match c.validate() {
            Err(PipelineError::InvalidConfig(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
        assert!(PipelineConfig::default().validate().is_ok());
    }

    #[test]
    fn presets_and_json() {
        assert_eq!(PipelineConfig::default().atlas_size(), 2048);
        assert_eq!(PipelineConfig::flash().atlas_size(), 1024);
        let c: PipelineConfig = serde_json::from_str(r#"{"operating_point":"flash","target_faces":500}"#).unwrap();
        assert_eq!(c.atlas_size(), 1024);
        assert_eq!(c.target_faces, 500);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus":1}"#).is_err());
        assert_eq!(c.hash(), c.clone().hash());
        assert_ne!(c.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn ladder_is_cumulative() {
        let steps = ladder_configs(&PipelineConfig::default());
        assert_eq!(steps.len(), 4);
        assert!(!steps[0].1.overlap && steps[0].1.uv_partitions == 1);
        assert!(steps[3].1.overlap && steps[3].1.uv_partitions == 8 && steps[3].1.visibility_method == VisibilityMethod::Raster);
    }
}
