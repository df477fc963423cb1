//! Fuses ten synthetic views of an unwrapped sphere into a texture atlas.

use asset_forge::render::{render_geometry, standard_cameras};
use asset_forge::texfuse::{fuse, FuseParams};
use asset_forge::uv::{unwrap, UnwrapParams};
use asset_forge::{fixtures, io};

fn main() {
    let mut mesh = fixtures::icosphere(4);
    mesh.normalize_to_sphere(0.5);
    let mesh = unwrap(&mesh, &UnwrapParams { atlas_resolution: 512, ..UnwrapParams::default() }).unwrap().mesh;
    let views = render_geometry(&mesh, &standard_cameras(512)).views;
    let colors = fixtures::synthetic_views(&mesh, 512);
    let params = FuseParams {
        atlas_resolution: 512,
        ..FuseParams::default()
    };
    let atlas = fuse(&mesh, &views, &colors, &params).unwrap();

    let mut err = Vec::new();
    for (i, ok) in atlas.geometry.valid.iter().enumerate() {
        if *ok {
            let want = fixtures::albedo(&atlas.geometry.position[i]);
            err.push((0..3).map(|c| (atlas.color[i][c] - want[c]).abs()).fold(0f32, f32::max));
        }
    }
    err.sort_by(f32::total_cmp);
    println!("{} texels, median error {:.4}", err.len(), err[err.len() / 2]);
    std::fs::create_dir_all("out").unwrap();
    io::write_color_png("out/atlas.png".as_ref(), &atlas.dilated(4)).unwrap();
}
