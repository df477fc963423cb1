//! Unwraps a torus and writes the textured OBJ.

use asset_forge::uv::{unwrap, UnwrapParams};
use asset_forge::{fixtures, io};

fn main() {
    let mesh = fixtures::torus(0.35, 0.12, 64, 24);
    let u = unwrap(&mesh, &UnwrapParams::default()).expect("unwrap");
    println!("{} charts, occupancy {:.3}", u.charts.len(), u.occupancy());
    std::fs::create_dir_all("out").unwrap();
    io::write_obj("out/torus_unwrapped.obj".as_ref(), &u.mesh, None).unwrap();
}
