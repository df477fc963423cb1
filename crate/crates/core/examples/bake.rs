//! Bakes detail from a bumpy sphere onto its simplified, unwrapped version.

use asset_forge::bake::{bake_normal_map, BakeParams};
use asset_forge::metrics::{baked_mean_error, geo_mean_error};
use asset_forge::simplify::{simplify, Placement, SimplifyOptions};
use asset_forge::uv::{unwrap, UnwrapParams};
use asset_forge::{fixtures, io};

fn main() {
    let hi = fixtures::displaced_sphere(60, 0.04, 5);
    let (lo, _) = simplify(&hi, &SimplifyOptions::new(1500, Placement::Optimal)).unwrap();
    let lo = unwrap(&lo, &UnwrapParams::default()).unwrap().mesh;
    let params = BakeParams {
        resolution: 1024,
        ..BakeParams::default()
    };
    let b = bake_normal_map(&lo, &hi, &params).unwrap();
    let geo = geo_mean_error(&lo, &hi, 10_000, 7).unwrap();
    let baked = baked_mean_error(&lo, &b.map, &hi, 10_000, 7).unwrap();
    println!("mean normal error: geometry {:.2}°, baked {:.2}°", geo.mean_deg, baked.mean_deg);
    std::fs::create_dir_all("out").unwrap();
    io::write_png_rgb8("out/normal.png".as_ref(), 1024, 1024, &b.map.data).unwrap();
}
