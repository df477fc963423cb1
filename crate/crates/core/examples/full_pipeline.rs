//! Runs every stage on a synthetic asset and prints the stage timings.
//!
//! Also leaves `dense.obj` and `colors/view{k}.png` in the output directory so
//! the same inputs can be fed to the `asset-forge` binary.

use std::path::PathBuf;

use asset_forge::fixtures;
use asset_forge::io;
use asset_forge::pipeline::{self, ColorSource, PipelineConfig, PipelineInputs, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/full_pipeline".into()));
    let mut dense = fixtures::displaced_sphere(60, 0.04, 3);
    pipeline::normalize_input(&mut dense);
    let views = fixtures::synthetic_views(&dense, 512);

    std::fs::create_dir_all(out.join("colors"))?;
    io::write_obj(&out.join("dense.obj"), &dense, None)?;
    for (k, img) in views.iter().enumerate() {
        io::write_color_png(&out.join("colors").join(format!("view{k}.png")), img)?;
    }

    let config = PipelineConfig {
        target_faces: 4000,
        atlas_resolution: Some(1024),
        view_resolution: 512,
        ..PipelineConfig::default()
    };
    let inputs = PipelineInputs {
        dense,
        colors: ColorSource::Decoded(views),
    };
    let report = pipeline::run_pipeline(&config, &inputs, &out, &RunOptions::default())?;

    println!("{} -> {} faces, {} charts", report.input_faces, report.culled_faces, report.charts);
    for s in &report.timing.stages {
        println!("  {:<18} {:7.3}s", s.name, s.seconds);
    }
    println!("critical path {:.3}s, sum {:.3}s", report.timing.critical_path, report.timing.sum_of_stages);
    println!("wrote {}", report.glb.display());
    Ok(())
}
