//! Geometry-aware hole filling over a 3D KD-tree of filled texels.

use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::FuseError;
use crate::Vec3;

/// Static 3D KD-tree over a point set. Nodes are implicit: each subrange
/// `[lo, hi)` of `order` stores its median at `(lo + hi) / 2` and splits on
/// the axis recorded there.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    axis: Vec<u8>,
}

#[derive(PartialEq)]
struct Cand(f64, u32);

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    // Max-heap on (distance, index) so the worst candidate is on top.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axis = vec![0u8; points.len()];
        build(&points, &mut order, &mut axis, 0);
        Self { points, order, axis }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: u32) -> Vec3 {
        self.points[i as usize]
    }

    /// The `k` nearest points as `(index, squared distance)`, nearest first;
    /// equal distances order by index.
    pub fn nearest(&self, q: &Vec3, k: usize) -> Vec<(u32, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.search(q, k, 0, self.order.len(), &mut heap);
        }
        let mut out: Vec<(u32, f64)> = heap.into_iter().map(|c| (c.1, c.0)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, q: &Vec3, k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Cand>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = self.points[idx as usize];
        let d2 = (p - q).norm_squared();
        let cand = Cand(d2, idx);
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(cand);
        }
        let ax = self.axis[mid] as usize;
        let delta = q[ax] - p[ax];
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, k, near.0, near.1, heap);
        // Ties at the splitting plane must still be visited.
        if heap.len() < k || delta * delta <= heap.peek().expect("heap is non-empty").0 {
            self.search(q, k, far.0, far.1, heap);
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], axis: &mut [u8], offset: usize) {
    if order.is_empty() {
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let ax = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][ax].total_cmp(&points[b as usize][ax]).then(a.cmp(&b))
    });
    axis[offset + mid] = ax as u8;
    let (left, right) = order.split_at_mut(mid);
    build(points, left, axis, offset);
    build(points, &mut right[1..], axis, offset + mid + 1);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpaintParams {
    pub neighbors: usize,
    /// σ_p as a fraction of the bounding-box diagonal.
    pub sigma_fraction: f64,
    /// Normal-alignment exponent γ.
    pub gamma: f64,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            neighbors: 16,
            sigma_fraction: 0.02,
            gamma: 2.0,
        }
    }
}

/// KD-tree over the filled texels of an atlas; building it needs only the
/// fill mask, so it can be prepared before colors exist.
#[derive(Debug, Clone)]
pub struct Inpainter {
    tree: KdTree,
    /// Atlas texel of each tree point.
    texel: Vec<u32>,
    normals: Vec<Vec3>,
}

impl Inpainter {
    pub fn new(position: &[Vec3], normal: &[Vec3], filled: &[bool]) -> Result<Self, FuseError> {
        let texel: Vec<u32> = (0..filled.len() as u32).filter(|&i| filled[i as usize]).collect();
        if texel.is_empty() {
            return Err(FuseError::NothingToInpaint);
        }
        let tree = KdTree::new(texel.iter().map(|&i| position[i as usize]).collect());
        let normals = texel.iter().map(|&i| normal[i as usize]).collect();
        Ok(Self { tree, texel, normals })
    }

    /// Fills every texel with `target[i] && !filled[i]` from the `m` nearest
    /// filled texels in 3D, weighted by `exp(-d²/2σ²) · max(0, n·n_j)^γ`.
    /// When every weight vanishes the nearest neighbour's color is used.
    /// Returns the new colors and the updated fill mask.
    pub fn apply(
        &self,
        color: &[[f32; 3]],
        filled: &[bool],
        target: &[bool],
        position: &[Vec3],
        normal: &[Vec3],
        sigma: f64,
        params: &InpaintParams,
    ) -> (Vec<[f32; 3]>, Vec<bool>) {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let fills: Vec<Option<[f32; 3]>> = (0..color.len())
            .into_par_iter()
            .map(|i| {
                if filled[i] || !target[i] {
                    return None;
                }
                let near = self.tree.nearest(&position[i], params.neighbors.max(1));
                let mut acc = [0.0f64; 3];
                let mut wsum = 0.0;
                for &(j, d2) in &near {
                    let align = normal[i].dot(&self.normals[j as usize]).max(0.0);
                    let w = (-d2 * inv).exp() * align.powf(params.gamma);
                    let c = color[self.texel[j as usize] as usize];
                    for k in 0..3 {
                        acc[k] += w * c[k] as f64;
                    }
                    wsum += w;
                }
                if wsum > 0.0 && wsum.is_finite() {
                    Some(acc.map(|v| (v / wsum) as f32))
                } else {
                    Some(color[self.texel[near[0].0 as usize] as usize])
                }
            })
            .collect();
        let mut out = color.to_vec();
        let mut mask = filled.to_vec();
        for (i, f) in fills.into_iter().enumerate() {
            if let Some(c) = f {
                out[i] = c;
                mask[i] = true;
            }
        }
        (out, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.random(), rng.random::<f64>() * 0.1, rng.random()))
            .collect();
        let tree = KdTree::new(pts.clone());
        for _ in 0..50 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random());
            let mut brute: Vec<(u32, f64)> = pts.iter().enumerate().map(|(i, p)| (i as u32, (p - q).norm_squared())).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            brute.truncate(16);
            assert_eq!(tree.nearest(&q, 16), brute);
        }
    }

    #[test]
    fn duplicate_points_resolve_by_index() {
        let tree = KdTree::new(vec![Vec3::zeros(); 5]);
        let got: Vec<u32> = tree.nearest(&Vec3::x(), 3).iter().map(|c| c.0).collect();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn surrounded_hole_takes_the_surrounding_color() {
        let mut pos = Vec::new();
        for y in 0..5 {
            for x in 0..5 {
                pos.push(Vec3::new(x as f64, y as f64, 0.0) * 0.01);
            }
        }
        let nrm = vec![Vec3::z(); 25];
        let mut filled = vec![true; 25];
        filled[12] = false;
        let color = vec![[1.0, 0.0, 0.0]; 25];
        let inp = Inpainter::new(&pos, &nrm, &filled).unwrap();
        let (c, m) = inp.apply(&color, &filled, &[true; 25], &pos, &nrm, 0.02, &InpaintParams::default());
        assert_eq!(c[12], [1.0, 0.0, 0.0]);
        assert!(m.iter().all(|&f| f));
    }

    #[test]
    fn nothing_filled_is_an_error() {
        let r = Inpainter::new(&[Vec3::zeros()], &[Vec3::z()], &[false]);
        assert!(matches!(r, Err(FuseError::NothingToInpaint)));
    }
}
