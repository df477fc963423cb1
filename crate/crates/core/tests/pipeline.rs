//! End-to-end pipeline runs: determinism across schedules and the exported
//! files read back.

use std::path::Path;

use asset_forge::pipeline::{run_pipeline, ColorSource, PipelineConfig, PipelineInputs, RunOptions};
use asset_forge::texfuse::read_glb;
use asset_forge::{fixtures, io, pipeline};

fn inputs() -> PipelineInputs {
    let mut dense = fixtures::displaced_sphere(30, 0.04, 4);
    pipeline::normalize_input(&mut dense);
    let colors = fixtures::synthetic_views(&dense, 192);
    PipelineInputs {
        dense,
        colors: ColorSource::Decoded(colors),
    }
}

fn config() -> PipelineConfig {
    PipelineConfig {
        target_faces: 1200,
        atlas_resolution: Some(256),
        view_resolution: 192,
        visibility_resolution: 192,
        visibility_views: 32,
        ..PipelineConfig::default()
    }
}

const FILES: [&str; 7] = [
    "asset.glb",
    "asset.obj",
    "asset.mtl",
    "asset_basecolor.png",
    "asset_normal.png",
    "asset_basecolor_obj.png",
    "asset_normal_obj.png",
];

fn contents(dir: &Path) -> Vec<Vec<u8>> {
    FILES.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn outputs_do_not_depend_on_the_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let inp = inputs();
    let mut reference = None;
    for (k, overlap) in [true, false, true].into_iter().enumerate() {
        let cfg = PipelineConfig { overlap, ..config() };
        let out = tmp.path().join(format!("run{k}"));
        let r = run_pipeline(&cfg, &inp, &out, &RunOptions::default()).unwrap();
        assert!(r.timing.critical_path <= r.timing.sum_of_stages + 1e-9);
        let max_stage = r.timing.stages.iter().map(|s| s.seconds).fold(0.0, f64::max);
        assert!(r.timing.critical_path >= max_stage);
        if !overlap {
            assert!((r.timing.critical_path - r.timing.sum_of_stages).abs() < 1e-9);
        }
        let files = contents(&out);
        match &reference {
            None => reference = Some(files),
            Some(f) => assert!(f == &files, "run {k} differs"),
        }
    }
}

#[test]
fn exported_asset_reads_back() {
    let tmp = tempfile::tempdir().unwrap();
    let inp = inputs();
    let r = run_pipeline(&config(), &inp, tmp.path(), &RunOptions::default()).unwrap();
    let obj = io::read_obj(&r.obj).unwrap();
    assert_eq!(obj.face_count(), r.culled_faces);
    let uv = obj.uv.as_ref().unwrap();
    assert!(uv.coords.iter().all(|c| (0.0..=1.0).contains(&c.x) && (0.0..=1.0).contains(&c.y)));
    assert!(obj.manifold_report().nonmanifold_edges == 0);

    let glb = read_glb(&r.glb).unwrap();
    assert_eq!(glb.indices.len(), 3 * obj.face_count());
    assert_eq!(glb.positions.len(), glb.texcoords.len());
    assert!(glb.normals.iter().all(|n| ((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-3));
    // every GLB vertex is an OBJ (position, uv) pair
    for (p, t) in glb.positions.iter().zip(&glb.texcoords) {
        let hit = obj.faces.iter().zip(&uv.faces).any(|(f, tf)| {
            (0..3).any(|k| {
                let q = obj.positions[f[k] as usize];
                let c = uv.coords[tf[k] as usize];
                [q.x as f32, q.y as f32, q.z as f32] == *p && [c.x as f32, c.y as f32] == *t
            })
        });
        assert!(hit);
    }
    // the OBJ textures are the GLB textures flipped vertically
    let (w, h, glb_color) = io::read_png_rgb8(&tmp.path().join("asset_basecolor.png")).unwrap();
    let (_, _, obj_color) = io::read_png_rgb8(&tmp.path().join("asset_basecolor_obj.png")).unwrap();
    assert_eq!((w, h), (256, 256));
    assert_eq!(io::flip_rows(&obj_color, w), glb_color);
    let (n, _, glb_normal) = io::read_png_rgb8(&tmp.path().join("asset_normal.png")).unwrap();
    let (_, _, obj_normal) = io::read_png_rgb8(&tmp.path().join("asset_normal_obj.png")).unwrap();
    let unflipped: Vec<[u8; 3]> = io::flip_rows(&obj_normal, n);
    let green_flipped: Vec<[u8; 3]> = glb_normal.iter().map(|c| [c[0], 255 - c[1], c[2]]).collect();
    assert_eq!(unflipped, green_flipped);
}

#[test]
fn invalid_configs_fail_before_any_stage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut inp = inputs();
    inp.colors = ColorSource::Decoded(vec![]);
    let cfg = PipelineConfig {
        target_faces: 1,
        fuse_alpha: -1.0,
        ..config()
    };
    match run_pipeline(&cfg, &inp, tmp.path(), &RunOptions::default()) {
        Err(asset_forge::pipeline::PipelineError::InvalidConfig(errs)) => assert!(errs.len() >= 2, "{errs:?}"),
        other => panic!("{other:?}"),
    }
    assert!(std::fs::read_dir(tmp.path()).unwrap().next().is_none());
}
