//! Geometric distances between a sphere and a slightly larger copy.

use asset_forge::fixtures;
use asset_forge::metrics::{evaluate, MetricParams};

fn main() {
    let a = fixtures::icosphere(4);
    let b = fixtures::scaled(&a, 1.01);
    let params = MetricParams {
        samples: 50_000,
        normalize: false,
        flip_resolution: 256,
        ..MetricParams::default()
    };
    let r = evaluate(&a, &b, None, &params).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
}
