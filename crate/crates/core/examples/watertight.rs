//! Closes a punctured sphere with scrambled winding. Holes much wider than
//! the dilated surface band let the exterior flood in and are not closed.

use asset_forge::fixtures;
use asset_forge::signfield::{make_watertight, SignParams};
use asset_forge::Vec3;

fn main() {
    let raw = fixtures::scramble_winding(&fixtures::puncture(&fixtures::icosphere(4), Vec3::z(), 0.1), 0.3, 1);
    let before = raw.manifold_report();
    let params = SignParams {
        resolution: 96,
        ..SignParams::default()
    };
    let w = make_watertight(&raw, &params).expect("watertight");
    let after = w.mesh.manifold_report();
    println!("before: {before:?}");
    println!("after:  {after:?}");
    println!("closed manifold: {}", after.is_closed_manifold());
}
