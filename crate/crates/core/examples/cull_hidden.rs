//! Removes an inner shell that no outside view can reach.

use asset_forge::fixtures;
use asset_forge::visibility::{cull_hidden, VisibilityParams};

fn main() {
    let mesh = fixtures::nested_spheres(3, 0.5);
    let (kept, _) = cull_hidden(&mesh, &VisibilityParams::default()).expect("cull");
    println!("{} faces -> {} visible", mesh.face_count(), kept.face_count());
}
