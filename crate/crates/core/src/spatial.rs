//! Bounding volume hierarchy over a triangle mesh.
//!
//! The tree is built once (median split on the longest centroid axis, at most
//! four triangles per leaf) and is immutable afterwards, so queries can run
//! from any number of threads. Ray hits and closest points break exact ties by
//! the lower face index, which makes every query deterministic.

use crate::mesh::{Aabb, TriangleMesh};
use crate::Vec3;

const LEAF_SIZE: usize = 4;
const MAX_DEPTH: usize = 64;
const DET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpatialError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("vertex {0} has a non-finite coordinate")]
    InvalidGeometry(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub face: u32,
    pub t: f64,
    /// Weights of the face's three corners.
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: u32,
    pub barycentric: [f64; 3],
    pub position: Vec3,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Left child for interior nodes, first primitive slot for leaves.
    first: u32,
    /// Number of primitives; zero marks an interior node.
    count: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Face index of each primitive slot.
    order: Vec<u32>,
    /// Triangle corners stored in slot order.
    tris: Vec<[Vec3; 3]>,
    depth: usize,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Bvh, SpatialError> {
        if mesh.faces.is_empty() {
            return Err(SpatialError::EmptyMesh);
        }
        if let Some(v) = mesh
            .positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(SpatialError::InvalidGeometry(v));
        }
        let n = mesh.faces.len();
        let centroids: Vec<Vec3> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes: Vec<Node> = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        let mut depth = 0;
        // (node index, start, end, depth)
        let mut stack = vec![(0usize, 0usize, n, 1usize)];
        nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
            right: 0,
        });
        while let Some((ni, start, end, d)) = stack.pop() {
            depth = depth.max(d);
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &f in &order[start..end] {
                for p in mesh.triangle(f as usize) {
                    bounds.grow(&p);
                }
                cbounds.grow(&centroids[f as usize]);
            }
            nodes[ni].bounds = bounds;
            let count = end - start;
            if count <= LEAF_SIZE || d >= MAX_DEPTH {
                nodes[ni].first = start as u32;
                nodes[ni].count = count as u32;
                continue;
            }
            let axis = cbounds.longest_axis();
            let mid = start + count / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
                right: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
                right: 0,
            });
            nodes[ni].first = left as u32;
            nodes[ni].right = (left + 1) as u32;
            stack.push((left + 1, mid, end, d + 1));
            stack.push((left, start, mid, d + 1));
        }
        let tris = order.iter().map(|&f| mesh.triangle(f as usize)).collect();
        Ok(Bvh {
            nodes,
            order,
            tris,
            depth,
        })
    }

    pub fn face_count(&self) -> usize {
        self.order.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Face indices of every leaf, in tree order.
    pub fn leaf_faces(&self) -> Vec<Vec<u32>> {
        self.nodes
            .iter()
            .filter(|n| n.count > 0)
            .map(|n| self.order[n.first as usize..(n.first + n.count) as usize].to_vec())
            .collect()
    }

    /// Checks that every node box encloses the triangles below it.
    pub fn validate(&self) -> bool {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if n.count > 0 {
                for s in n.first..n.first + n.count {
                    if !self.tris[s as usize]
                        .iter()
                        .all(|p| n.bounds.contains(p, 1e-12))
                    {
                        return false;
                    }
                }
            } else {
                for c in [n.first as usize, n.right as usize] {
                    let cb = &self.nodes[c].bounds;
                    if !(n.bounds.contains(&cb.min, 1e-12) && n.bounds.contains(&cb.max, 1e-12)) {
                        return false;
                    }
                    stack.push(c);
                }
            }
        }
        true
    }

    /// Nearest intersection with `t > 0` along a unit-length direction.
    pub fn raycast_first(&self, origin: &Vec3, direction: &Vec3) -> Option<RayHit> {
        self.raycast_bounded(origin, direction, f64::INFINITY)
    }

    /// Like [`Bvh::raycast_first`] but ignores hits beyond `t_max`.
    pub fn raycast_bounded(&self, origin: &Vec3, direction: &Vec3, t_max: f64) -> Option<RayHit> {
        let inv = Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        let mut best: Option<RayHit> = None;
        let mut best_t = t_max;
        let mut stack = [0u32; MAX_DEPTH * 2 + 2];
        let mut sp = 0;
        slab(&self.nodes[0].bounds, origin, &inv, best_t)?;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            match slab(&node.bounds, origin, &inv, best_t) {
                Some(_) => {}
                None => continue,
            }
            if node.count > 0 {
                for s in node.first..node.first + node.count {
                    let face = self.order[s as usize];
                    if let Some((t, bary)) = intersect_triangle(&self.tris[s as usize], origin, direction) {
                        let better = match &best {
                            None => t <= best_t,
                            Some(b) => t < b.t || (t == b.t && face < b.face),
                        };
                        if better {
                            best_t = t;
                            best = Some(RayHit {
                                face,
                                t,
                                barycentric: bary,
                            });
                        }
                    }
                }
            } else {
                let l = node.first;
                let r = node.right;
                let tl = slab(&self.nodes[l as usize].bounds, origin, &inv, best_t);
                let tr = slab(&self.nodes[r as usize].bounds, origin, &inv, best_t);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        // Near child goes on top of the stack.
                        if a <= b {
                            stack[sp] = r;
                            stack[sp + 1] = l;
                        } else {
                            stack[sp] = l;
                            stack[sp + 1] = r;
                        }
                        sp += 2;
                    }
                    (Some(_), None) => {
                        stack[sp] = l;
                        sp += 1;
                    }
                    (None, Some(_)) => {
                        stack[sp] = r;
                        sp += 1;
                    }
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Closest point on the surface to `query`.
    pub fn closest_point(&self, query: &Vec3) -> SurfacePoint {
        self.closest_point_within(query, f64::INFINITY)
            .expect("unbounded query always finds a face")
    }

    /// Closest point no farther than `max_distance`, if any.
    pub fn closest_point_within(&self, query: &Vec3, max_distance: f64) -> Option<SurfacePoint> {
        let mut best_d2 = if max_distance.is_finite() {
            max_distance * max_distance
        } else {
            f64::INFINITY
        };
        let mut best: Option<(u32, f64, [f64; 3], Vec3)> = None;
        let mut stack = [0u32; MAX_DEPTH * 2 + 2];
        let mut sp = 1;
        stack[0] = 0;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.distance_squared(query) > best_d2 {
                continue;
            }
            if node.count > 0 {
                for s in node.first..node.first + node.count {
                    let face = self.order[s as usize];
                    let (p, bary) = closest_on_triangle(&self.tris[s as usize], query);
                    let d2 = (p - query).norm_squared();
                    let better = match &best {
                        None => d2 <= best_d2,
                        Some((bf, _, _, _)) => d2 < best_d2 || (d2 == best_d2 && face < *bf),
                    };
                    if better {
                        best_d2 = d2;
                        best = Some((face, d2, bary, p));
                    }
                }
            } else {
                let l = node.first;
                let r = node.right;
                let dl = self.nodes[l as usize].bounds.distance_squared(query);
                let dr = self.nodes[r as usize].bounds.distance_squared(query);
                if dl <= dr {
                    stack[sp] = r;
                    stack[sp + 1] = l;
                } else {
                    stack[sp] = l;
                    stack[sp + 1] = r;
                }
                sp += 2;
            }
        }
        best.map(|(face, d2, barycentric, position)| SurfacePoint {
            face,
            barycentric,
            position,
            distance: d2.sqrt(),
        })
    }
}

/// Entry distance of the ray into the box, if it enters before `t_max`.
#[inline]
fn slab(b: &Aabb, o: &Vec3, inv: &Vec3, t_max: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for i in 0..3 {
        let mut ta = (b.min[i] - o[i]) * inv[i];
        let mut tb = (b.max[i] - o[i]) * inv[i];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        // NaN from 0 * inf (origin on a slab plane with a parallel ray) keeps
        // the current interval.
        if ta > t0 {
            t0 = ta;
        }
        if tb < t1 {
            t1 = tb;
        }
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// Möller–Trumbore intersection with closed edges. Returns `t > 0` and the
/// corner weights.
#[inline]
pub fn intersect_triangle(tri: &[Vec3; 3], o: &Vec3, d: &Vec3) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= DET_EPS * scale || scale == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t <= 1e-12 {
        return None;
    }
    Some((t, [1.0 - u - v, u, v]))
}

/// Closest point on a triangle (Voronoi-region walk) with corner weights.
pub fn closest_on_triangle(tri: &[Vec3; 3], p: &Vec3) -> (Vec3, [f64; 3]) {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = va + vb + vc;
    if denom.abs() < f64::MIN_POSITIVE {
        // Degenerate sliver: fall back to the nearest corner.
        let corners = [(a, [1.0, 0.0, 0.0]), (b, [0.0, 1.0, 0.0]), (c, [0.0, 0.0, 1.0])];
        return corners
            .into_iter()
            .min_by(|x, y| (x.0 - p).norm_squared().total_cmp(&(y.0 - p).norm_squared()))
            .unwrap();
    }
    let inv = 1.0 / denom;
    let v = vb * inv;
    let w = vc * inv;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
