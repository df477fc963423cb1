//! Renders the ten conditioning views and writes them as raw rasters.

use asset_forge::render::{render_geometry, standard_cameras, STANDARD_VIEW_NAMES};
use asset_forge::{fixtures, io};

fn main() {
    let mut mesh = fixtures::torus(0.35, 0.12, 64, 24);
    mesh.normalize_to_sphere(0.5);
    let set = render_geometry(&mesh, &standard_cameras(512));
    for (name, v) in STANDARD_VIEW_NAMES.iter().zip(&set.views) {
        let fg = v.depth.iter().filter(|d| d.is_finite()).count();
        println!("{name:<8} {fg} foreground pixels");
    }
    io::write_views("out/views".as_ref(), &set.views, &STANDARD_VIEW_NAMES).unwrap();
}
