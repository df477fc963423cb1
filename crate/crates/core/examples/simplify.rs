//! Decimates a bumpy sphere with both vertex placement rules.

use asset_forge::fixtures;
use asset_forge::metrics::{chamfer, MetricParams};
use asset_forge::simplify::{simplify, Placement, SimplifyOptions};

fn main() {
    let dense = fixtures::displaced_sphere(50, 0.05, 2);
    let params = MetricParams {
        samples: 50_000,
        ..MetricParams::default()
    };
    for placement in [Placement::Optimal, Placement::Midpoint] {
        let (m, r) = simplify(&dense, &SimplifyOptions::new(2000, placement)).expect("simplify");
        let cd = chamfer(&m, &dense, &params).expect("chamfer");
        println!("{placement:?}: {} -> {} faces, {} rounds, chamfer {cd:.3e}", dense.face_count(), m.face_count(), r.rounds);
    }
}
