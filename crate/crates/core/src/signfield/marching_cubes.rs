//! Marching cubes over a dense scalar grid.
//!
//! The case table is generated on first use instead of being hand-written:
//! each cube face contributes directed segments that cut its "inside" corners
//! (value below the iso level) away from the outside ones, and ambiguous faces
//! always separate the inside corners. Two cubes sharing a face therefore
//! agree on its segments, traversed in opposite directions, which makes the
//! output closed and consistently oriented with normals pointing toward
//! larger values.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::mesh::TriangleMesh;
use crate::Vec3;

/// Corner offsets: bit 0 is x, bit 1 is y, bit 2 is z.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// The 12 cube edges as corner pairs (low corner first).
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Marks the extra polygon-centroid vertex in a triangle.
const CENTROID: u8 = u8::MAX;

/// One surface polygon inside a cube: its crossing edges in loop order and a
/// triangulation over loop positions.
struct CasePolygon {
    edges: Vec<u8>,
    tris: Vec<[u8; 3]>,
}

type CaseTable = Vec<Vec<CasePolygon>>;

/// Cube faces (axis * 2 + side) containing edge `e`.
fn edge_faces(e: u8) -> [usize; 2] {
    let (a, b) = EDGES[e as usize];
    let axis = (0..3).find(|&i| CORNERS[a][i] != CORNERS[b][i]).unwrap();
    let mut out = [0; 2];
    let mut k = 0;
    for i in 0..3 {
        if i != axis {
            out[k] = i * 2 + CORNERS[a][i];
            k += 1;
        }
    }
    out
}

fn share_face(a: u8, b: u8) -> bool {
    let fa = edge_faces(a);
    let fb = edge_faces(b);
    fa.iter().any(|f| fb.contains(f))
}

/// Fan triangulation whose diagonals stay off the cube faces, so no edge can
/// be shared with a neighbouring cube; falls back to a centroid fan.
fn triangulate(poly: &[u8]) -> Vec<[u8; 3]> {
    let n = poly.len();
    if n == 3 {
        return vec![[0, 1, 2]];
    }
    for apex in 0..n {
        let safe = (2..n - 1).all(|k| !share_face(poly[apex], poly[(apex + k) % n]));
        if safe {
            return (1..n - 1)
                .map(|k| [apex as u8, ((apex + k) % n) as u8, ((apex + k + 1) % n) as u8])
                .collect();
        }
    }
    (0..n)
        .map(|i| [CENTROID, i as u8, ((i + 1) % n) as u8])
        .collect()
}

fn edge_between(a: usize, b: usize) -> u8 {
    EDGES
        .iter()
        .position(|&(x, y)| (x == a && y == b) || (x == b && y == a))
        .expect("corners share an edge") as u8
}

/// Corners of each face in counter-clockwise order about its outward normal.
fn face_cycles() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for axis in 0..3 {
        for side in 0..2 {
            let corners: Vec<usize> = (0..8).filter(|&c| CORNERS[c][axis] == side).collect();
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let normal_sign = if side == 1 { 1.0 } else { -1.0 };
            let mut sorted = corners.clone();
            sorted.sort_by(|&a, &b| {
                let ang = |c: usize| {
                    let x = CORNERS[c][u] as f64 - 0.5;
                    let y = CORNERS[c][v] as f64 - 0.5;
                    (normal_sign * y).atan2(x)
                };
                ang(a).total_cmp(&ang(b))
            });
            out.push([sorted[0], sorted[1], sorted[2], sorted[3]]);
        }
    }
    out
}

fn build_table() -> CaseTable {
    let faces = face_cycles();
    (0..256usize)
        .map(|case| {
            let inside = |c: usize| case & (1 << c) != 0;
            let mut next: [Option<u8>; 12] = [None; 12];
            for cycle in &faces {
                // Each maximal run of inside corners yields one segment from
                // the crossing entering the run to the crossing leaving it.
                for i in 0..4 {
                    let c = cycle[i];
                    let prev = cycle[(i + 3) % 4];
                    if inside(c) && !inside(prev) {
                        let enter = edge_between(prev, c);
                        let mut j = i;
                        while inside(cycle[(j + 1) % 4]) {
                            j = (j + 1) % 4;
                        }
                        let leave = edge_between(cycle[j], cycle[(j + 1) % 4]);
                        debug_assert!(next[enter as usize].is_none());
                        next[enter as usize] = Some(leave);
                    }
                }
            }
            let mut used = [false; 12];
            let mut polys = Vec::new();
            for start in 0..12 {
                if used[start] || next[start].is_none() {
                    continue;
                }
                let mut poly = Vec::new();
                let mut e = start;
                while !used[e] {
                    used[e] = true;
                    poly.push(e as u8);
                    e = next[e].expect("crossing edges form closed loops") as usize;
                }
                let tris = triangulate(&poly);
                polys.push(CasePolygon { edges: poly, tris });
            }
            polys
        })
        .collect()
}

fn table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Scalar samples on a regular lattice; `index = x + nx * (y + ny * z)`.
pub struct ScalarGrid<'a> {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: f64,
    pub values: &'a [f32],
}

impl ScalarGrid<'_> {
    /// Out-of-range samples read as `outside`, which closes any surface that
    /// would otherwise be cut by the grid boundary.
    #[inline]
    fn value(&self, x: isize, y: isize, z: isize, outside: f32) -> f32 {
        let [nx, ny, nz] = self.dims;
        if x < 0 || y < 0 || z < 0 || x >= nx as isize || y >= ny as isize || z >= nz as isize {
            return outside;
        }
        self.values[x as usize + nx * (y as usize + ny * z as usize)]
    }
}

/// Extracts the `iso` level set. Samples `< iso` are inside; the surface is
/// oriented with normals pointing toward larger values.
pub fn extract(grid: &ScalarGrid, iso: f32) -> TriangleMesh {
    let table = table();
    let [nx, ny, nz] = grid.dims;
    let outside = f32::MAX;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    // Key: lattice point linear index (in the padded lattice) * 3 + axis.
    let mut vertex_ids: HashMap<u64, u32> = HashMap::new();
    let px = nx as i64 + 2;
    let py = ny as i64 + 2;
    for z in -1..nz as isize {
        for y in -1..ny as isize {
            for x in -1..nx as isize {
                let mut vals = [0f32; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    let v = grid.value(x + off[0] as isize, y + off[1] as isize, z + off[2] as isize, outside);
                    vals[c] = v;
                    if v < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for poly in &table[case] {
                    let ids: Vec<u32> = poly
                        .edges
                        .iter()
                        .map(|&e| {
                            let (a, b) = EDGES[e as usize];
                            let oa = CORNERS[a];
                            let axis = (0..3).find(|&i| CORNERS[a][i] != CORNERS[b][i]).unwrap();
                            let lx = x as i64 + oa[0] as i64 + 1;
                            let ly = y as i64 + oa[1] as i64 + 1;
                            let lz = z as i64 + oa[2] as i64 + 1;
                            let key = ((lx + px * (ly + py * lz)) * 3 + axis as i64) as u64;
                            *vertex_ids.entry(key).or_insert_with(|| {
                                let (va, vb) = (vals[a] as f64, vals[b] as f64);
                                let t = if vb != va {
                                    ((iso as f64 - va) / (vb - va)).clamp(1e-3, 1.0 - 1e-3)
                                } else {
                                    0.5
                                };
                                let pa = Vec3::new(
                                    (x + oa[0] as isize) as f64,
                                    (y + oa[1] as isize) as f64,
                                    (z + oa[2] as isize) as f64,
                                );
                                let mut p = pa;
                                p[axis] += t;
                                positions.push(grid.origin + p * grid.spacing);
                                (positions.len() - 1) as u32
                            })
                        })
                        .collect();
                    let mut centroid = None;
                    for tri in &poly.tris {
                        let f = tri.map(|k| {
                            if k == CENTROID {
                                *centroid.get_or_insert_with(|| {
                                    let c = ids.iter().map(|&i| positions[i as usize]).sum::<Vec3>()
                                        / ids.len() as f64;
                                    positions.push(c);
                                    (positions.len() - 1) as u32
                                })
                            } else {
                                ids[k as usize]
                            }
                        });
                        faces.push(f);
                    }
                }
            }
        }
    }
    TriangleMesh::new(positions, faces)
}
