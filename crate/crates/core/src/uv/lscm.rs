//! Least-squares conformal parameterization of a single chart.
//!
//! Each triangle contributes the two residuals of the Cauchy–Riemann
//! condition `∇v = rot90(∇u)` in its own orthonormal frame, weighted by the
//! square root of its area. Two boundary vertices are pinned and the
//! remaining least-squares system is solved with column-scaled CGLS.
//! Charts that are not disks, or whose map folds over, are bisected and
//! retried.

use std::collections::{BTreeMap, VecDeque};

use super::{Chart, UvError};
use crate::mesh::{cross2, TriangleMesh};
use crate::{Vec2, Vec3};

pub const MAX_SPLIT_DEPTH: usize = 8;

/// Chart-local indexed triangles.
pub(crate) struct LocalChart {
    /// Global vertex index of each local vertex.
    #[allow(dead_code)]
    pub verts: Vec<u32>,
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl LocalChart {
    pub fn new(mesh: &TriangleMesh, faces: &[u32]) -> Self {
        let mut map: BTreeMap<u32, usize> = BTreeMap::new();
        let mut verts = Vec::new();
        let local_faces = faces
            .iter()
            .map(|&f| {
                mesh.faces[f as usize].map(|v| {
                    *map.entry(v).or_insert_with(|| {
                        verts.push(v);
                        verts.len() - 1
                    })
                })
            })
            .collect();
        let positions = verts.iter().map(|&v| mesh.positions[v as usize]).collect();
        Self {
            verts,
            positions,
            faces: local_faces,
        }
    }

    /// Directed boundary edges (edges used by exactly one face), or `None`
    /// when some edge has more than two faces or inconsistent winding.
    fn boundary(&self) -> Option<Vec<(usize, usize)>> {
        let mut count: BTreeMap<(usize, usize), (u32, usize, usize)> = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_insert((0, a, b));
                e.0 += 1;
                if e.0 == 2 && e.1 == a {
                    return None;
                }
            }
        }
        let mut out = Vec::new();
        for (_, (c, a, b)) in count {
            match c {
                1 => out.push((a, b)),
                2 => {}
                _ => return None,
            }
        }
        Some(out)
    }

    /// Disk test: one simple boundary loop and Euler characteristic 1.
    pub fn is_disk(&self) -> bool {
        let Some(boundary) = self.boundary() else {
            return false;
        };
        if boundary.is_empty() {
            return false;
        }
        let mut next = vec![usize::MAX; self.positions.len()];
        for &(a, b) in &boundary {
            if next[a] != usize::MAX {
                return false;
            }
            next[a] = b;
        }
        let start = boundary[0].0;
        let mut v = start;
        let mut steps = 0;
        loop {
            v = next[v];
            steps += 1;
            if v == usize::MAX || steps > boundary.len() {
                return false;
            }
            if v == start {
                break;
            }
        }
        if steps != boundary.len() {
            return false;
        }
        let edges = (3 * self.faces.len() + boundary.len()) / 2;
        self.positions.len() as i64 - edges as i64 + self.faces.len() as i64 == 1
    }

    fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary()
            .unwrap_or_default()
            .iter()
            .map(|e| e.0)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Triangle in its own frame: `q0 = 0`, `q1` on the x axis.
fn local_frame(p: &[Vec3; 3]) -> Option<([Vec2; 3], f64)> {
    let e1 = p[1] - p[0];
    let l = e1.norm();
    let n = e1.cross(&(p[2] - p[0]));
    let nn = n.norm();
    if l == 0.0 || nn == 0.0 {
        return None;
    }
    let x = e1 / l;
    let y = (n / nn).cross(&x);
    let d = p[2] - p[0];
    let q = [Vec2::zeros(), Vec2::new(l, 0.0), Vec2::new(d.dot(&x), d.dot(&y))];
    Some((q, 0.5 * nn))
}

/// Coefficients of the two residual rows for one triangle, ordered
/// `[u0, u1, u2, v0, v1, v2]`, already scaled by `sqrt(area)`.
fn residual_rows(p: &[Vec3; 3]) -> Option<[[f64; 6]; 2]> {
    let (q, area) = local_frame(p)?;
    let s = area.sqrt() / (2.0 * area);
    let mut rx = [0.0; 6];
    let mut ry = [0.0; 6];
    for j in 0..3 {
        let e = q[(j + 2) % 3] - q[(j + 1) % 3];
        // Gradient of the j-th barycentric: perp(e) / 2A.
        let gx = -e.y;
        let gy = e.x;
        // r_x = dv/dx + du/dy, r_y = dv/dy - du/dx
        rx[j] = gy * s;
        rx[3 + j] = gx * s;
        ry[j] = -gx * s;
        ry[3 + j] = gy * s;
    }
    Some([rx, ry])
}

/// Conformal energy of a parameterized chart, normalized by its 3D area.
pub fn conformal_energy(mesh: &TriangleMesh, chart: &Chart) -> f64 {
    let mut total = 0.0;
    let mut area = 0.0;
    for (i, &f) in chart.faces.iter().enumerate() {
        let p = mesh.triangle(f as usize);
        if let Some(rows) = residual_rows(&p) {
            let uv = chart.uv[i];
            for r in &rows {
                let mut acc = 0.0;
                for j in 0..3 {
                    acc += r[j] * uv[j].x + r[3 + j] * uv[j].y;
                }
                total += acc * acc;
            }
        }
        area += mesh.face_area(f as usize);
    }
    if area > 0.0 {
        total / area
    } else {
        0.0
    }
}

fn pick_pins(chart: &LocalChart) -> (usize, usize) {
    let b = chart.boundary_vertices();
    let p = &chart.positions;
    if b.len() <= 2000 {
        let mut best = (0.0, b[0], b[b.len() - 1]);
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                let d = (p[b[i]] - p[b[j]]).norm_squared();
                if d > best.0 {
                    best = (d, b[i], b[j]);
                }
            }
        }
        (best.1, best.2)
    } else {
        let far = |from: usize| {
            *b.iter()
                .max_by(|&&x, &&y| (p[x] - p[from]).norm_squared().total_cmp(&(p[y] - p[from]).norm_squared()).then(y.cmp(&x)))
                .unwrap()
        };
        let a = far(b[0]);
        let c = far(a);
        (a.min(c), a.max(c))
    }
}

/// Solves the pinned LSCM system; returns per-local-vertex UVs.
pub(crate) fn solve_lscm(chart: &LocalChart) -> Option<Vec<Vec2>> {
    let n = chart.positions.len();
    let (pa, pb) = pick_pins(chart);
    let dist = (chart.positions[pb] - chart.positions[pa]).norm();
    if dist == 0.0 {
        return None;
    }
    // Unknown layout: u for vertex i at i, v at n + i; pinned ones removed.
    let pinned = |var: usize| var == pa || var == pb || var == n + pa || var == n + pb;
    let pin_value = |var: usize| if var == pb { dist } else { 0.0 };
    let mut free_index = vec![usize::MAX; 2 * n];
    let mut free = 0;
    for (var, slot) in free_index.iter_mut().enumerate() {
        if !pinned(var) {
            *slot = free;
            free += 1;
        }
    }
    // Sparse rows as (free column, coefficient) lists plus right-hand side.
    let mut rows: Vec<[(usize, f64); 6]> = Vec::with_capacity(2 * chart.faces.len());
    let mut rhs: Vec<f64> = Vec::with_capacity(2 * chart.faces.len());
    for f in &chart.faces {
        let Some(rr) = residual_rows(&f.map(|i| chart.positions[i])) else {
            continue;
        };
        for r in &rr {
            let mut row = [(usize::MAX, 0.0); 6];
            let mut b = 0.0;
            for j in 0..6 {
                let var = if j < 3 { f[j] } else { n + f[j - 3] };
                if pinned(var) {
                    b -= r[j] * pin_value(var);
                } else {
                    row[j] = (free_index[var], r[j]);
                }
            }
            rows.push(row);
            rhs.push(b);
        }
    }
    // Column scaling (Jacobi preconditioning for CGLS).
    let mut colnorm = vec![0.0; free];
    for row in &rows {
        for &(c, a) in row {
            if c != usize::MAX {
                colnorm[c] += a * a;
            }
        }
    }
    if colnorm.contains(&0.0) {
        return None;
    }
    let d: Vec<f64> = colnorm.iter().map(|c| 1.0 / c.sqrt()).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, a) in row {
                if c != usize::MAX {
                    acc += a * d[c] * x[c];
                }
            }
            out[i] = acc;
        }
    };
    let apply_t = |r: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in rows.iter().enumerate() {
            for &(c, a) in row {
                if c != usize::MAX {
                    out[c] += a * d[c] * r[i];
                }
            }
        }
    };
    // Initial guess: projection onto the plane spanned by the pin axis and
    // the chart's mean normal.
    let x_axis = (chart.positions[pb] - chart.positions[pa]) / dist;
    let mut nsum = Vec3::zeros();
    for f in &chart.faces {
        let [a, b, c] = f.map(|i| chart.positions[i]);
        nsum += (b - a).cross(&(c - a));
    }
    let normal = (nsum - x_axis * nsum.dot(&x_axis)).try_normalize(1e-300);
    let mut y = vec![0.0; free];
    if let Some(normal) = normal {
        let y_axis = normal.cross(&x_axis);
        for i in 0..n {
            let rel = chart.positions[i] - chart.positions[pa];
            if free_index[i] != usize::MAX {
                y[free_index[i]] = rel.dot(&x_axis) / d[free_index[i]];
            }
            if free_index[n + i] != usize::MAX {
                y[free_index[n + i]] = rel.dot(&y_axis) / d[free_index[n + i]];
            }
        }
    }
    // CGLS on min |A D y - b|.
    let m = rows.len();
    let mut ay = vec![0.0; m];
    apply(&y, &mut ay);
    let mut r: Vec<f64> = rhs.iter().zip(&ay).map(|(b, a)| b - a).collect();
    let mut s = vec![0.0; free];
    apply_t(&r, &mut s);
    let mut p = s.clone();
    let mut gamma: f64 = s.iter().map(|v| v * v).sum();
    let mut bt = vec![0.0; free];
    apply_t(&rhs, &mut bt);
    let scale = bt.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-11 * scale;
    let mut q = vec![0.0; m];
    let max_iter = 20 * free + 200;
    for _ in 0..max_iter {
        if gamma.sqrt() <= tol {
            break;
        }
        apply(&p, &mut q);
        let qq: f64 = q.iter().map(|v| v * v).sum();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for i in 0..free {
            y[i] += alpha * p[i];
        }
        for i in 0..m {
            r[i] -= alpha * q[i];
        }
        apply_t(&r, &mut s);
        let g_new: f64 = s.iter().map(|v| v * v).sum();
        let beta = g_new / gamma;
        gamma = g_new;
        for i in 0..free {
            p[i] = s[i] + beta * p[i];
        }
    }
    let value = |var: usize| {
        if pinned(var) {
            pin_value(var)
        } else {
            let c = free_index[var];
            y[c] * d[c]
        }
    };
    let uv: Vec<Vec2> = (0..n).map(|i| Vec2::new(value(i), value(n + i))).collect();
    if uv.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return None;
    }
    Some(uv)
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| cross2(&(q - p), &(r - p));
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

/// Whether the chart boundary crosses itself in UV space.
fn boundary_self_intersects(chart: &LocalChart, uv: &[Vec2]) -> bool {
    let Some(edges) = chart.boundary() else {
        return true;
    };
    let mut segs: Vec<(f64, f64, usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (uv[a].x.min(uv[b].x), uv[a].x.max(uv[b].x), a, b))
        .collect();
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    for i in 0..segs.len() {
        let (_, xmax, a, b) = segs[i];
        for &(xmin2, _, c, d) in &segs[i + 1..] {
            if xmin2 > xmax {
                break;
            }
            if a == c || a == d || b == c || b == d {
                continue;
            }
            if segments_cross(uv[a], uv[b], uv[c], uv[d]) {
                return true;
            }
        }
    }
    false
}

/// Splits faces at the median centroid along their widest axis, then into
/// edge-connected pieces.
fn bisect_chart(mesh: &TriangleMesh, faces: &[u32]) -> Vec<Vec<u32>> {
    let centroid = |f: u32| {
        let t = mesh.triangle(f as usize);
        (t[0] + t[1] + t[2]) / 3.0
    };
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &f in faces {
        let c = centroid(f);
        lo = lo.inf(&c);
        hi = hi.sup(&c);
    }
    let axis = (hi - lo).imax();
    let mut sorted = faces.to_vec();
    sorted.sort_by(|&a, &b| centroid(a)[axis].total_cmp(&centroid(b)[axis]).then(a.cmp(&b)));
    let half = sorted.len() / 2;
    let mut out = Vec::new();
    for part in [&sorted[..half], &sorted[half..]] {
        out.extend(connected_pieces(mesh, part));
    }
    out
}

/// Edge-connected components of a face subset, each sorted.
pub(crate) fn connected_pieces(mesh: &TriangleMesh, faces: &[u32]) -> Vec<Vec<u32>> {
    let mut by_edge: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, &f) in faces.iter().enumerate() {
        let t = mesh.faces[f as usize];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    let mut adj = vec![Vec::new(); faces.len()];
    for list in by_edge.values() {
        if list.len() == 2 {
            adj[list[0]].push(list[1]);
            adj[list[1]].push(list[0]);
        }
    }
    let mut comp = vec![usize::MAX; faces.len()];
    let mut out = Vec::new();
    for s in 0..faces.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = out.len();
        let mut piece = vec![faces[s]];
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if comp[j] == usize::MAX {
                    comp[j] = out.len();
                    piece.push(faces[j]);
                    queue.push_back(j);
                }
            }
        }
        piece.sort_unstable();
        out.push(piece);
    }
    out
}

/// Parameterizes one chart. The result may contain several charts when the
/// input had to be split.
pub fn parameterize_lscm(mesh: &TriangleMesh, chart: &Chart) -> Result<Vec<Chart>, UvError> {
    let mut out = Vec::new();
    param_rec(mesh, &chart.faces, 0, &mut out)?;
    Ok(out)
}

fn param_rec(mesh: &TriangleMesh, faces: &[u32], depth: usize, out: &mut Vec<Chart>) -> Result<(), UvError> {
    match try_param(mesh, faces) {
        Some(chart) => {
            out.push(chart);
            Ok(())
        }
        None if faces.len() <= 1 || depth >= MAX_SPLIT_DEPTH => Err(UvError::ChartFailure {
            first_face: faces.first().copied().unwrap_or(0),
            faces: faces.len(),
        }),
        None => {
            for piece in bisect_chart(mesh, faces) {
                param_rec(mesh, &piece, depth + 1, out)?;
            }
            Ok(())
        }
    }
}

/// One LSCM attempt; `None` asks the caller to split and retry.
fn try_param(mesh: &TriangleMesh, faces: &[u32]) -> Option<Chart> {
    let local = LocalChart::new(mesh, faces);
    if !local.is_disk() {
        return None;
    }
    let mut uv = solve_lscm(&local)?;
    let signed = |uv: &[Vec2], f: &[usize; 3]| 0.5 * cross2(&(uv[f[1]] - uv[f[0]]), &(uv[f[2]] - uv[f[0]]));
    let total: f64 = local.faces.iter().map(|f| signed(&uv, f)).sum();
    if total < 0.0 {
        for p in &mut uv {
            p.x = -p.x;
        }
    }
    let total = total.abs();
    if !(total > 0.0) {
        return None;
    }
    let min_area = 1e-12 * total;
    if local.faces.iter().any(|f| signed(&uv, f) <= min_area) {
        return None;
    }
    if boundary_self_intersects(&local, &uv) {
        return None;
    }
    let area3d: f64 = faces.iter().map(|&f| mesh.face_area(f as usize)).sum();
    let s = (area3d / total).sqrt();
    let min = uv.iter().fold(Vec2::repeat(f64::INFINITY), |m, p| m.inf(p));
    for p in &mut uv {
        *p = (*p - min) * s;
    }
    Some(Chart {
        faces: faces.to_vec(),
        uv: local.faces.iter().map(|f| f.map(|i| uv[i])).collect(),
    })
}
