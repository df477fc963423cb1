//! Quadric-error edge-collapse simplification.
//!
//! Collapses run in rounds. Each round evaluates every edge, sorts the
//! candidates by `(cost, edge)`, and greedily accepts collapses whose
//! neighbourhoods are pairwise disjoint, so the accepted set could be applied
//! in any order (or concurrently) with the same result.
//!
//! Placement follows the merged quadric `Q = Q0 + Q1`: the unconstrained
//! minimizer is projected back onto the edge segment and clamped, which keeps
//! the new vertex within the edge while following the error surface. The
//! projection is taken in the quadric's own metric, so the clamped point is
//! the exact minimizer of the energy along the segment. Singular quadrics fall
//! back to the midpoint; boundary edges collapse onto an endpoint. The same
//! placement is used for ranking and for execution.

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::Vec3;

/// Pivot-ratio threshold above which `A` is treated as singular.
const SINGULAR_CONDITION: f64 = 1e12;
const MIN_FACE_AREA: f64 = 1e-12;

/// Homogeneous quadric `E(v) = v'Av + 2b'v + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadric {
    pub a: Matrix3<f64>,
    pub b: Vec3,
    pub c: f64,
}

impl Default for Quadric {
    fn default() -> Self {
        Self::zero()
    }
}

impl std::ops::Add for Quadric {
    type Output = Quadric;
    fn add(self, o: Quadric) -> Quadric {
        Quadric {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }
}

impl std::ops::AddAssign for Quadric {
    fn add_assign(&mut self, o: Quadric) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }
}

impl Quadric {
    pub fn zero() -> Self {
        Self {
            a: Matrix3::zeros(),
            b: Vec3::zeros(),
            c: 0.0,
        }
    }

    /// Weighted squared distance to the plane `n . x + d = 0` (`n` unit).
    pub fn from_plane(n: Vec3, d: f64, weight: f64) -> Self {
        Self {
            a: n * n.transpose() * weight,
            b: n * (d * weight),
            c: d * d * weight,
        }
    }

    pub fn eval(&self, v: &Vec3) -> f64 {
        v.dot(&(self.a * v)) + 2.0 * self.b.dot(v) + self.c
    }

    /// Solves `A x = -b` by elimination with partial pivoting. Returns `None`
    /// when the pivot ratio exceeds the singularity threshold.
    pub fn minimizer(&self) -> Option<Vec3> {
        let mut m = self.a;
        let mut rhs = -self.b;
        let mut pivots = [0.0f64; 3];
        for col in 0..3 {
            let piv = (col..3)
                .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
                .unwrap();
            if piv != col {
                m.swap_rows(piv, col);
                rhs.swap_rows(piv, col);
            }
            let p = m[(col, col)];
            pivots[col] = p.abs();
            if p == 0.0 {
                return None;
            }
            for row in col + 1..3 {
                let f = m[(row, col)] / p;
                for k in col..3 {
                    m[(row, k)] -= f * m[(col, k)];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let max = pivots.iter().cloned().fold(0.0, f64::max);
        let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 || max / min > SINGULAR_CONDITION {
            return None;
        }
        let mut x = Vec3::zeros();
        for row in (0..3).rev() {
            let mut s = rhs[row];
            for k in row + 1..3 {
                s -= m[(row, k)] * x[k];
            }
            x[row] = s / m[(row, row)];
        }
        Some(x)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.a - self.a.transpose()).abs().max() <= 1e-12 * self.a.abs().max().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PlacementKind {
    OptimalInterior,
    ClampedEdge,
    Midpoint,
    Endpoint,
    BoundaryFixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseCandidate {
    pub edge: (u32, u32),
    pub cost: f64,
    pub target: Vec3,
    pub kind: PlacementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Optimal,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Boundary edges collapse onto the endpoint with lower error.
    #[default]
    LowerErrorEndpoint,
    /// Boundary vertices never move.
    Locked,
}

/// Boundary context of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryFlags {
    /// The edge itself has a single incident face.
    pub edge: bool,
    pub v0: bool,
    pub v1: bool,
    pub policy: BoundaryPolicy,
}

fn endpoint_choice(q: &Quadric, v0: &Vec3, v1: &Vec3, edge: (u32, u32), kind: PlacementKind) -> CollapseCandidate {
    let e0 = q.eval(v0);
    let e1 = q.eval(v1);
    let (target, cost) = if e1 < e0 { (*v1, e1) } else { (*v0, e0) };
    CollapseCandidate {
        edge,
        cost: cost.max(0.0),
        target,
        kind,
    }
}

/// Boundary handling shared by both placement modes. `None` means the edge
/// needs no special treatment; `Some(None)` means it may not collapse.
fn boundary_placement(
    q: &Quadric,
    v0: &Vec3,
    v1: &Vec3,
    edge: (u32, u32),
    flags: BoundaryFlags,
) -> Option<Option<CollapseCandidate>> {
    let locked = flags.policy == BoundaryPolicy::Locked;
    if flags.edge || (flags.v0 && flags.v1) {
        if locked {
            return Some(None);
        }
        return Some(Some(endpoint_choice(q, v0, v1, edge, PlacementKind::Endpoint)));
    }
    if flags.v0 || flags.v1 {
        let target = if flags.v0 { *v0 } else { *v1 };
        return Some(Some(CollapseCandidate {
            edge,
            cost: q.eval(&target).max(0.0),
            target,
            kind: PlacementKind::BoundaryFixed,
        }));
    }
    None
}

/// Edge-constrained optimal placement for the merged quadric `q0 + q1`.
///
/// Returns `None` only when the boundary policy forbids the collapse.
pub fn place_contraction(
    q0: &Quadric,
    q1: &Quadric,
    v0: &Vec3,
    v1: &Vec3,
    edge: (u32, u32),
    flags: BoundaryFlags,
) -> Option<CollapseCandidate> {
    let q = *q0 + *q1;
    if let Some(b) = boundary_placement(&q, v0, v1, edge, flags) {
        return b;
    }
    let midpoint = || {
        let target = (v0 + v1) * 0.5;
        CollapseCandidate {
            edge,
            cost: q.eval(&target).max(0.0),
            target,
            kind: PlacementKind::Midpoint,
        }
    };
    let Some(v_opt) = q.minimizer() else {
        return Some(midpoint());
    };
    let d = v1 - v0;
    let ad = q.a * d;
    let denom = d.dot(&ad);
    if denom <= 0.0 || !denom.is_finite() {
        return Some(midpoint());
    }
    let t_raw = (v_opt - v0).dot(&ad) / denom;
    let t = t_raw.clamp(0.0, 1.0);
    let target = v0 + d * t;
    let kind = if t > 0.0 && t < 1.0 {
        PlacementKind::OptimalInterior
    } else {
        PlacementKind::ClampedEdge
    };
    Some(CollapseCandidate {
        edge,
        cost: q.eval(&target).max(0.0),
        target,
        kind,
    })
}

/// Baseline placement: midpoint for interior edges, endpoint on boundaries.
pub fn place_midpoint(
    q0: &Quadric,
    q1: &Quadric,
    v0: &Vec3,
    v1: &Vec3,
    edge: (u32, u32),
    flags: BoundaryFlags,
) -> Option<CollapseCandidate> {
    let q = *q0 + *q1;
    if let Some(b) = boundary_placement(&q, v0, v1, edge, flags) {
        return b;
    }
    let target = (v0 + v1) * 0.5;
    Some(CollapseCandidate {
        edge,
        cost: q.eval(&target).max(0.0),
        target,
        kind: PlacementKind::Midpoint,
    })
}

fn face_quadric(positions: &[Vec3], face: &[u32; 3]) -> Quadric {
    let [a, b, c] = face.map(|v| positions[v as usize]);
    let cross = (b - a).cross(&(c - a));
    let len = cross.norm();
    if len == 0.0 {
        return Quadric::zero();
    }
    let n = cross / len;
    Quadric::from_plane(n, -n.dot(&a), 0.5 * len)
}

/// Per-vertex sum of area-weighted incident face plane quadrics.
pub fn init_quadrics(mesh: &TriangleMesh) -> Vec<Quadric> {
    let mut qs = vec![Quadric::zero(); mesh.positions.len()];
    for face in &mesh.faces {
        let q = face_quadric(&mesh.positions, face);
        for &v in face {
            qs[v as usize] += q;
        }
    }
    qs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifyOptions {
    pub target_faces: usize,
    pub placement: Placement,
    pub boundary: BoundaryPolicy,
    /// Fraction of the cheapest edges considered in each round.
    pub round_fraction: f64,
    /// Keep a log of executed collapses with their merged quadrics.
    pub record_collapses: bool,
}

impl SimplifyOptions {
    pub fn new(target_faces: usize, placement: Placement) -> Self {
        Self {
            target_faces,
            placement,
            boundary: BoundaryPolicy::default(),
            round_fraction: 0.2,
            record_collapses: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutedCollapse {
    pub candidate: CollapseCandidate,
    pub quadric: Quadric,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimplifyReport {
    pub rounds: usize,
    pub collapses: usize,
    pub vetoed_flip: usize,
    pub vetoed_link: usize,
    /// False when no further collapse was legal before reaching the target.
    pub target_reached: bool,
    pub log: Vec<ExecutedCollapse>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplifyError {
    #[error("target face count {0} is below the minimum of 4")]
    TargetTooSmall(usize),
}

struct State {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    quadrics: Vec<Quadric>,
    boundary: Vec<bool>,
    face_count: usize,
}

impl State {
    fn new(mesh: &TriangleMesh) -> Self {
        let mut vertex_faces = vec![Vec::new(); mesh.positions.len()];
        for (f, face) in mesh.faces.iter().enumerate() {
            for &v in face {
                vertex_faces[v as usize].push(f as u32);
            }
        }
        let mut boundary = vec![false; mesh.positions.len()];
        let edges = mesh.edge_face_list();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            if j - i != 2 {
                boundary[edges[i].0 as usize] = true;
                boundary[edges[i].1 as usize] = true;
            }
            i = j;
        }
        Self {
            positions: mesh.positions.clone(),
            faces: mesh.faces.clone(),
            alive: vec![true; mesh.faces.len()],
            vertex_faces,
            quadrics: init_quadrics(mesh),
            boundary,
            face_count: mesh.faces.len(),
        }
    }

    /// Undirected edges of live faces with their incident face count.
    fn edges(&self) -> Vec<(u32, u32, u8)> {
        let mut e: Vec<(u32, u32)> = Vec::with_capacity(self.face_count * 3);
        for (f, face) in self.faces.iter().enumerate() {
            if !self.alive[f] {
                continue;
            }
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                e.push((a.min(b), a.max(b)));
            }
        }
        e.par_sort_unstable();
        let mut out = Vec::with_capacity(e.len() / 2 + 1);
        let mut i = 0;
        while i < e.len() {
            let mut j = i + 1;
            while j < e.len() && e[j] == e[i] {
                j += 1;
            }
            out.push((e[i].0, e[i].1, (j - i).min(255) as u8));
            i = j;
        }
        out
    }

    fn neighbors(&self, v: u32, out: &mut Vec<u32>) {
        out.clear();
        for &f in &self.vertex_faces[v as usize] {
            for &u in &self.faces[f as usize] {
                if u != v {
                    out.push(u);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Link condition: the common neighbours of the endpoints are exactly the
    /// apexes of the faces sharing the edge.
    fn link_ok(&self, a: u32, b: u32, na: &[u32], nb: &[u32]) -> bool {
        let mut apexes: Vec<u32> = self.vertex_faces[a as usize]
            .iter()
            .filter(|&&f| self.faces[f as usize].contains(&b))
            .map(|&f| {
                *self.faces[f as usize]
                    .iter()
                    .find(|&&u| u != a && u != b)
                    .unwrap()
            })
            .collect();
        apexes.sort_unstable();
        let mut common = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < na.len() && j < nb.len() {
            match na[i].cmp(&nb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common.push(na[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        common == apexes
    }

    /// Rejects collapses that flip a surviving face by more than 90 degrees
    /// or leave it degenerate.
    fn flips(&self, a: u32, b: u32, target: &Vec3) -> bool {
        for &v in &[a, b] {
            for &f in &self.vertex_faces[v as usize] {
                let face = self.faces[f as usize];
                if face.contains(&a) && face.contains(&b) {
                    continue;
                }
                let old = face.map(|u| self.positions[u as usize]);
                let new = face.map(|u| if u == a || u == b { *target } else { self.positions[u as usize] });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                if 0.5 * n_new.norm() < MIN_FACE_AREA || n_old.dot(&n_new) < 0.0 {
                    return true;
                }
            }
        }
        false
    }

    fn collapse(&mut self, keep: u32, remove: u32, target: Vec3, merged: Quadric) {
        let removed_faces: Vec<u32> = self.vertex_faces[remove as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&keep))
            .collect();
        for &f in &removed_faces {
            self.alive[f as usize] = false;
            self.face_count -= 1;
            for &u in &self.faces[f as usize] {
                self.vertex_faces[u as usize].retain(|&g| g != f);
            }
        }
        let moved = std::mem::take(&mut self.vertex_faces[remove as usize]);
        for f in moved {
            for u in self.faces[f as usize].iter_mut() {
                if *u == remove {
                    *u = keep;
                }
            }
            self.vertex_faces[keep as usize].push(f);
        }
        self.vertex_faces[keep as usize].sort_unstable();
        self.positions[keep as usize] = target;
        self.boundary[keep as usize] |= self.boundary[remove as usize];
        self.quadrics[keep as usize] = if self.boundary[keep as usize] {
            let mut q = Quadric::zero();
            for &f in &self.vertex_faces[keep as usize] {
                q += face_quadric(&self.positions, &self.faces[f as usize]);
            }
            q
        } else {
            merged
        };
    }

    fn into_mesh(self) -> TriangleMesh {
        let faces = self
            .faces
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| *f)
            .collect();
        TriangleMesh::new(self.positions, faces).compact()
    }
}

/// Simplifies `mesh` toward `options.target_faces` faces.
pub fn simplify(mesh: &TriangleMesh, options: &SimplifyOptions) -> Result<(TriangleMesh, SimplifyReport), SimplifyError> {
    if options.target_faces < 4 {
        return Err(SimplifyError::TargetTooSmall(options.target_faces));
    }
    let mut report = SimplifyReport {
        target_reached: true,
        ..Default::default()
    };
    if mesh.face_count() <= options.target_faces {
        return Ok((mesh.clone(), report));
    }
    let mut st = State::new(mesh);
    let place = match options.placement {
        Placement::Optimal => place_contraction,
        Placement::Midpoint => place_midpoint,
    };
    let mut na = Vec::new();
    let mut nb = Vec::new();
    let mut region = Vec::new();
    while st.face_count > options.target_faces {
        let edges = st.edges();
        let mut cands: Vec<CollapseCandidate> = edges
            .par_iter()
            .filter(|e| e.2 <= 2)
            .filter_map(|&(a, b, count)| {
                let flags = BoundaryFlags {
                    edge: count == 1,
                    v0: st.boundary[a as usize],
                    v1: st.boundary[b as usize],
                    policy: options.boundary,
                };
                place(
                    &st.quadrics[a as usize],
                    &st.quadrics[b as usize],
                    &st.positions[a as usize],
                    &st.positions[b as usize],
                    (a, b),
                    flags,
                )
            })
            .collect();
        cands.par_sort_unstable_by(|x, y| x.cost.total_cmp(&y.cost).then(x.edge.cmp(&y.edge)));
        let window = ((cands.len() as f64 * options.round_fraction).ceil() as usize).max(1);
        let mut locked = vec![false; st.positions.len()];
        let mut accepted: Vec<CollapseCandidate> = Vec::new();
        let mut projected = st.face_count;
        for cand in cands.iter().take(window) {
            if projected <= options.target_faces {
                break;
            }
            let (a, b) = cand.edge;
            if locked[a as usize] || locked[b as usize] {
                continue;
            }
            st.neighbors(a, &mut na);
            st.neighbors(b, &mut nb);
            region.clear();
            region.extend_from_slice(&na);
            region.extend_from_slice(&nb);
            if region.iter().any(|&u| locked[u as usize]) {
                continue;
            }
            if !st.link_ok(a, b, &na, &nb) {
                report.vetoed_link += 1;
                continue;
            }
            let shared = st.vertex_faces[a as usize]
                .iter()
                .filter(|&&f| st.faces[f as usize].contains(&b))
                .count();
            if st.face_count - shared < 4 {
                continue;
            }
            if st.flips(a, b, &cand.target) {
                report.vetoed_flip += 1;
                continue;
            }
            for &u in region.iter() {
                locked[u as usize] = true;
            }
            projected -= shared;
            accepted.push(*cand);
        }
        if accepted.is_empty() {
            report.target_reached = false;
            break;
        }
        report.rounds += 1;
        for cand in accepted {
            let (a, b) = cand.edge;
            let merged = st.quadrics[a as usize] + st.quadrics[b as usize];
            if options.record_collapses {
                report.log.push(ExecutedCollapse {
                    candidate: cand,
                    quadric: merged,
                });
            }
            st.collapse(a, b, cand.target, merged);
            report.collapses += 1;
        }
    }
    Ok((st.into_mesh(), report))
}
