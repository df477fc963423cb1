//! Chart segmentation: greedy growth, the pairwise merge pass, and the
//! partitioned variant with halo overlap and boundary reconciliation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rayon::prelude::*;

use super::Chart;
use crate::mesh::TriangleMesh;
use crate::Vec3;

const UNASSIGNED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Growth stops for faces whose cost exceeds this.
    pub cost_threshold: f64,
    pub crease_angle_deg: f64,
    /// Cost multiplier when the growth step crosses a crease.
    pub crease_factor: f64,
    /// Criterion 4: shared boundary as a fraction of the smaller chart's.
    pub merge_boundary_fraction: f64,
    /// Criterion 5: merged normal-cone half-angle limit.
    pub normal_gate_deg: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            cost_threshold: 0.35,
            crease_angle_deg: 70.0,
            crease_factor: 2.0,
            merge_boundary_fraction: 0.5,
            normal_gate_deg: 45.0,
        }
    }
}

/// Per-face geometry and edge adjacency.
pub(crate) struct FaceGraph {
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
    pub centroids: Vec<Vec3>,
    pub adj: Vec<[Option<u32>; 3]>,
    pub edge_len: Vec<[f64; 3]>,
}

impl FaceGraph {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let n = mesh.face_count();
        let mut normals = Vec::with_capacity(n);
        let mut areas = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        let mut edge_len = Vec::with_capacity(n);
        for f in 0..n {
            let t = mesh.triangle(f);
            normals.push(mesh.face_normal(f));
            areas.push(mesh.face_area(f));
            centroids.push((t[0] + t[1] + t[2]) / 3.0);
            edge_len.push([(t[1] - t[0]).norm(), (t[2] - t[1]).norm(), (t[0] - t[2]).norm()]);
        }
        Self {
            normals,
            areas,
            centroids,
            adj: mesh.face_adjacency(),
            edge_len,
        }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    /// Induced subgraph on `faces` (sorted); edges leaving the set become
    /// boundary. `slot` is scratch of length `len()` filled with `u32::MAX`
    /// and restored before returning.
    fn subgraph(&self, faces: &[u32], slot: &mut [u32]) -> FaceGraph {
        for (i, &f) in faces.iter().enumerate() {
            slot[f as usize] = i as u32;
        }
        let pick = |f: &u32| self.normals[*f as usize];
        let sub = FaceGraph {
            normals: faces.iter().map(pick).collect(),
            areas: faces.iter().map(|&f| self.areas[f as usize]).collect(),
            centroids: faces.iter().map(|&f| self.centroids[f as usize]).collect(),
            adj: faces
                .iter()
                .map(|&f| {
                    self.adj[f as usize].map(|nb| nb.and_then(|nb| Some(slot[nb as usize]).filter(|&s| s != u32::MAX)))
                })
                .collect(),
            edge_len: faces.iter().map(|&f| self.edge_len[f as usize]).collect(),
        };
        for &f in faces {
            slot[f as usize] = u32::MAX;
        }
        sub
    }
}

fn cost_key(c: f64) -> u64 {
    // Non-negative floats order like their bit patterns.
    c.max(0.0).to_bits()
}

/// Greedy chart growth with farthest-face seeding. Returns per-face labels
/// in seed order. Only faces flagged in `seedable` (all when `None`) start
/// charts; others join a chart only by growth and may stay `UNASSIGNED`.
fn grow(g: &FaceGraph, p: &SegmentParams, seedable: Option<&[bool]>) -> Vec<u32> {
    let n = g.len();
    let can_seed = |f: usize| seedable.is_none_or(|s| s[f]);
    let mut label = vec![UNASSIGNED; n];
    let mut dist = vec![u32::MAX; n];
    let crease_cos = p.crease_angle_deg.to_radians().cos();
    let mut next_label = 0u32;
    let mut seed = (0..n).find(|&f| can_seed(f));
    let mut heap = BinaryHeap::new();
    let mut members = Vec::new();
    while let Some(s) = seed {
        let id = next_label;
        next_label += 1;
        members.clear();
        let mut nsum = g.normals[s] * g.areas[s];
        label[s] = id;
        members.push(s as u32);
        let cost = |f: usize, via: usize, nsum: &Vec3| -> f64 {
            let mean = nsum.try_normalize(1e-300).unwrap_or(g.normals[via]);
            let base = (1.0 - g.normals[f].dot(&mean)).max(0.0);
            if g.normals[f].dot(&g.normals[via]) < crease_cos {
                base * p.crease_factor
            } else {
                base
            }
        };
        heap.clear();
        for nb in g.adj[s].iter().flatten() {
            let nb = *nb as usize;
            if label[nb] == UNASSIGNED {
                heap.push(Reverse((cost_key(cost(nb, s, &nsum)), nb as u32, s as u32)));
            }
        }
        while let Some(Reverse((key, f, via))) = heap.pop() {
            let (f, via) = (f as usize, via as usize);
            if label[f] != UNASSIGNED {
                continue;
            }
            let fresh = cost(f, via, &nsum);
            if cost_key(fresh) > key {
                // The chart normal moved since this entry was queued.
                heap.push(Reverse((cost_key(fresh), f as u32, via as u32)));
                continue;
            }
            if fresh > p.cost_threshold {
                continue;
            }
            label[f] = id;
            members.push(f as u32);
            nsum += g.normals[f] * g.areas[f];
            for nb in g.adj[f].iter().flatten() {
                let nb = *nb as usize;
                if label[nb] == UNASSIGNED {
                    heap.push(Reverse((cost_key(cost(nb, f, &nsum)), nb as u32, f as u32)));
                }
            }
        }
        // Graph distance from the assigned region, updated from the new chart.
        let mut queue: VecDeque<u32> = VecDeque::new();
        for &m in &members {
            dist[m as usize] = 0;
            queue.push_back(m);
        }
        while let Some(f) = queue.pop_front() {
            let d = dist[f as usize] + 1;
            for nb in g.adj[f as usize].iter().flatten() {
                if dist[*nb as usize] > d {
                    dist[*nb as usize] = d;
                    queue.push_back(*nb);
                }
            }
        }
        // Farthest unassigned face; unreachable faces count as infinitely far.
        seed = None;
        let mut best = 0u32;
        for f in 0..n {
            if label[f] == UNASSIGNED && can_seed(f) && (seed.is_none() || dist[f] > best) {
                best = dist[f];
                seed = Some(f);
            }
        }
    }
    label
}

/// Relabels so chart ids follow the order of each chart's lowest face index.
fn canonicalize(labels: &mut [u32]) -> usize {
    let mut map: BTreeMap<u32, u32> = BTreeMap::new();
    let mut next = 0;
    for l in labels.iter_mut() {
        let id = *map.entry(*l).or_insert_with(|| {
            next += 1;
            next - 1
        });
        *l = id;
    }
    next as usize
}

pub(crate) fn labels_to_charts(labels: &[u32]) -> Vec<Chart> {
    let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut charts = vec![Chart::default(); count];
    for (f, &l) in labels.iter().enumerate() {
        charts[l as usize].faces.push(f as u32);
    }
    charts.retain(|c| !c.faces.is_empty());
    charts
}

fn charts_to_labels(charts: &[Chart], faces: usize) -> Vec<u32> {
    let mut labels = vec![UNASSIGNED; faces];
    for (i, c) in charts.iter().enumerate() {
        for &f in &c.faces {
            labels[f as usize] = i as u32;
        }
    }
    labels
}

struct ChartStats {
    faces: Vec<Vec<u32>>,
    nsum: Vec<Vec3>,
    boundary: Vec<f64>,
    open_boundary: Vec<f64>,
    shared: Vec<BTreeMap<u32, f64>>,
}

fn chart_stats(g: &FaceGraph, labels: &[u32], count: usize) -> ChartStats {
    let mut s = ChartStats {
        faces: vec![Vec::new(); count],
        nsum: vec![Vec3::zeros(); count],
        boundary: vec![0.0; count],
        open_boundary: vec![0.0; count],
        shared: vec![BTreeMap::new(); count],
    };
    for f in 0..g.len() {
        let c = labels[f] as usize;
        s.faces[c].push(f as u32);
        s.nsum[c] += g.normals[f] * g.areas[f];
        for k in 0..3 {
            let len = g.edge_len[f][k];
            match g.adj[f][k] {
                None => {
                    s.boundary[c] += len;
                    s.open_boundary[c] += len;
                }
                Some(nb) => {
                    let d = labels[nb as usize];
                    if d as usize != c {
                        s.boundary[c] += len;
                        *s.shared[c].entry(d).or_insert(0.0) += len;
                    }
                }
            }
        }
    }
    s
}

fn cone_ok(g: &FaceGraph, s: &ChartStats, a: usize, b: usize, cos_gate: f64) -> bool {
    let Some(axis) = (s.nsum[a] + s.nsum[b]).try_normalize(1e-300) else {
        return false;
    };
    s.faces[a].iter().chain(&s.faces[b]).all(|&f| {
        let f = f as usize;
        g.areas[f] == 0.0 || g.normals[f].dot(&axis) > cos_gate
    })
}

/// Merge target of chart `a` under criteria 1–4, if any.
fn merge_target(g: &FaceGraph, s: &ChartStats, labels: &[u32], a: usize, p: &SegmentParams) -> Option<usize> {
    let faces = &s.faces[a];
    if faces.len() == 1 {
        // (1) Absorbed across its longest shared edge.
        let f = faces[0] as usize;
        let mut ks = [0usize, 1, 2];
        ks.sort_by(|&x, &y| g.edge_len[f][y].total_cmp(&g.edge_len[f][x]).then(x.cmp(&y)));
        return ks
            .iter()
            .find_map(|&k| g.adj[f][k].map(|nb| labels[nb as usize] as usize));
    }
    let dominant = s.shared[a]
        .iter()
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(x.0)))
        .map(|(&b, _)| b as usize);
    if faces.len() == 2 {
        // (2) Two faces forming a quad.
        return dominant;
    }
    if s.open_boundary[a] == 0.0 && s.shared[a].len() == 1 {
        // (3) Enclosed by a single neighbour.
        return dominant;
    }
    // (4) Significant shared boundary.
    s.shared[a]
        .iter()
        .filter(|&(&b, &len)| len > p.merge_boundary_fraction * s.boundary[a].min(s.boundary[b as usize]))
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(x.0)))
        .map(|(&b, _)| b as usize)
}

/// Merges chart pairs under the five criteria until no merge applies.
fn merge_labels(g: &FaceGraph, labels: &mut [u32], p: &SegmentParams) {
    let cos_gate = p.normal_gate_deg.to_radians().cos();
    let mut count = canonicalize(labels);
    loop {
        let s = chart_stats(g, labels, count);
        let mut touched = vec![false; count];
        let mut redirect: Vec<u32> = (0..count as u32).collect();
        let mut merged = false;
        for a in 0..count {
            if touched[a] {
                continue;
            }
            let Some(b) = merge_target(g, &s, labels, a, p) else {
                continue;
            };
            if b == a || touched[b] || !cone_ok(g, &s, a, b, cos_gate) {
                continue;
            }
            touched[a] = true;
            touched[b] = true;
            redirect[a] = b as u32;
            merged = true;
        }
        if !merged {
            break;
        }
        for l in labels.iter_mut() {
            *l = redirect[*l as usize];
        }
        count = canonicalize(labels);
    }
}

/// Pairwise merge pass over an existing chart assignment.
pub fn merge_pass(mesh: &TriangleMesh, charts: &[Chart], params: &SegmentParams) -> Vec<Chart> {
    let g = FaceGraph::new(mesh);
    let mut labels = charts_to_labels(charts, mesh.face_count());
    assert!(
        labels.iter().all(|&l| l != UNASSIGNED),
        "merge_pass requires every face to belong to a chart"
    );
    merge_labels(&g, &mut labels, params);
    labels_to_charts(&labels)
}

fn segment_graph(g: &FaceGraph, params: &SegmentParams) -> Vec<u32> {
    let mut labels = grow(g, params, None);
    merge_labels(g, &mut labels, params);
    labels
}

/// Greedy segmentation followed by the merge pass. Charts are ordered by
/// their lowest face index and list faces in increasing order.
pub fn segment_charts(mesh: &TriangleMesh, params: &SegmentParams) -> Vec<Chart> {
    let g = FaceGraph::new(mesh);
    labels_to_charts(&segment_graph(&g, params))
}

/// A spatial piece of the mesh: owned core faces plus an overlap halo.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub owner: usize,
    pub core: Vec<u32>,
    pub halo: Vec<u32>,
}

fn bisect(g: &FaceGraph, mut faces: Vec<u32>, parts: usize, out: &mut Vec<Vec<u32>>) {
    if parts <= 1 || faces.len() < 2 {
        out.push(faces);
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &f in &faces {
        let c = g.centroids[f as usize];
        lo = lo.inf(&c);
        hi = hi.sup(&c);
    }
    let axis = (hi - lo).imax();
    faces.sort_by(|&a, &b| {
        g.centroids[a as usize][axis]
            .total_cmp(&g.centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left_parts = parts / 2;
    let total: f64 = faces.iter().map(|&f| g.areas[f as usize]).sum();
    let target = total * left_parts as f64 / parts as f64;
    let mut acc = 0.0;
    let mut cut = faces.len() - 1;
    for (i, &f) in faces.iter().enumerate() {
        acc += g.areas[f as usize];
        if acc >= target {
            cut = i + 1;
            break;
        }
    }
    let cut = cut.clamp(1, faces.len() - 1);
    let right = faces.split_off(cut);
    bisect(g, faces, left_parts, out);
    bisect(g, right, parts - left_parts, out);
}

/// Phases 1 and 2: median-area recursive bisection and N-ring halos.
pub fn make_partitions(mesh: &TriangleMesh, partitions: usize, halo_rings: usize) -> Vec<Partition> {
    let g = FaceGraph::new(mesh);
    build_partitions(&g, partitions, halo_rings)
}

fn build_partitions(g: &FaceGraph, partitions: usize, halo_rings: usize) -> Vec<Partition> {
    let mut cores = Vec::new();
    bisect(g, (0..g.len() as u32).collect(), partitions.max(1), &mut cores);
    let mut owner = vec![0usize; g.len()];
    for (p, core) in cores.iter().enumerate() {
        for &f in core {
            owner[f as usize] = p;
        }
    }
    cores
        .into_iter()
        .enumerate()
        .map(|(p, mut core)| {
            core.sort_unstable();
            let mut ring = vec![u32::MAX; g.len()];
            let mut queue: VecDeque<u32> = VecDeque::new();
            for &f in &core {
                ring[f as usize] = 0;
                queue.push_back(f);
            }
            let mut halo = Vec::new();
            while let Some(f) = queue.pop_front() {
                let r = ring[f as usize];
                if r as usize >= halo_rings {
                    continue;
                }
                for nb in g.adj[f as usize].iter().flatten() {
                    if ring[*nb as usize] == u32::MAX {
                        ring[*nb as usize] = r + 1;
                        if owner[*nb as usize] != p {
                            halo.push(*nb);
                        }
                        queue.push_back(*nb);
                    }
                }
            }
            halo.sort_unstable();
            Partition { owner: p, core, halo }
        })
        .collect()
}

/// Four-phase partition-with-overlap segmentation.
pub fn segment_parallel(mesh: &TriangleMesh, partitions: usize, halo_rings: usize, params: &SegmentParams) -> Vec<Chart> {
    let g = FaceGraph::new(mesh);
    let n = g.len();
    let parts = build_partitions(&g, partitions, halo_rings);
    let mut owner_of = vec![0usize; n];
    for p in &parts {
        for &f in &p.core {
            owner_of[f as usize] = p.owner;
        }
    }

    // Phase 3: independent segmentation of core + halo.
    let local: Vec<(Vec<u32>, Vec<u32>)> = parts
        .par_iter()
        .map(|p| {
            let mut faces: Vec<u32> = p.core.iter().chain(&p.halo).copied().collect();
            faces.sort_unstable();
            let mut slot = vec![u32::MAX; n];
            let sub = g.subgraph(&faces, &mut slot);
            if parts.len() == 1 {
                return (faces, segment_graph(&sub, params));
            }
            // Charts start only in the core; halo faces give growth context.
            let core: Vec<bool> = faces.iter().map(|&f| owner_of[f as usize] == p.owner).collect();
            let mut labels = grow(&sub, params, Some(&core));
            // Unreached halo faces form one throwaway label so the local merge
            // pass sees a full assignment.
            let spare = labels.iter().filter(|&&l| l != UNASSIGNED).max().map_or(0, |m| m + 1);
            for l in labels.iter_mut() {
                if *l == UNASSIGNED {
                    *l = spare;
                }
            }
            merge_labels(&sub, &mut labels, params);
            (faces, labels)
        })
        .collect();

    // Phase 4: core faces keep their owner's chart.
    let mut labels = vec![UNASSIGNED; n];
    let owner = owner_of;
    let mut offsets = Vec::with_capacity(parts.len());
    let mut offset = 0u32;
    for (p, (faces, local_labels)) in parts.iter().zip(&local) {
        offsets.push(offset);
        let mut max_label = 0;
        for (&f, &l) in faces.iter().zip(local_labels) {
            if owner[f as usize] == p.owner {
                labels[f as usize] = offset + l;
            }
            max_label = max_label.max(l + 1);
        }
        offset += max_label;
    }
    unify_across_halos(&g, &local, &offsets, &owner, &mut labels, params);
    join_across_cuts(&g, &owner, &mut labels, params);
    split_disconnected(&g, &mut labels);
    assign_orphans(&g, &mut labels);
    merge_labels(&g, &mut labels, params);
    labels_to_charts(&labels)
}

/// Charts continued across a partition boundary are recognised through the
/// halo: when most of chart `a`'s halo faces inside partition `q` carry
/// `q`'s chart `b`, and most of `b`'s halo faces inside `a`'s partition carry
/// `a`, the two are one chart. Unions still respect the normal gate.
fn unify_across_halos(
    g: &FaceGraph,
    local: &[(Vec<u32>, Vec<u32>)],
    offsets: &[u32],
    owner: &[usize],
    labels: &mut [u32],
    params: &SegmentParams,
) {
    // votes[(a, b)] = halo faces of a (in b's partition) whose core label is b;
    // totals[(a, q)] = halo faces of a inside partition q.
    let mut votes: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut totals: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut part_of: BTreeMap<u32, usize> = BTreeMap::new();
    for (pi, (faces, local_labels)) in local.iter().enumerate() {
        for (&f, &l) in faces.iter().zip(local_labels) {
            let a = offsets[pi] + l;
            part_of.insert(a, pi);
            if owner[f as usize] != pi {
                let q = owner[f as usize];
                *totals.entry((a, q)).or_insert(0) += 1;
                *votes.entry((a, labels[f as usize])).or_insert(0) += 1;
            }
        }
    }
    let agrees = |a: u32, b: u32| -> Option<usize> {
        let q = *part_of.get(&b)?;
        let v = *votes.get(&(a, b))?;
        (2 * v > totals[&(a, q)]).then_some(v)
    };
    let mut pairs: Vec<(usize, u32, u32)> = votes
        .keys()
        .filter(|(a, b)| a < b)
        .filter_map(|&(a, b)| Some((agrees(a, b)? + agrees(b, a)?, a, b)))
        .collect();
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    if pairs.is_empty() {
        return;
    }
    let count = labels.iter().filter(|&&l| l != UNASSIGNED).max().map_or(0, |m| m + 1) as usize;
    let mut uf = LabelUnion::new(g, labels, count);
    let cos_gate = params.normal_gate_deg.to_radians().cos();
    for (_, a, b) in pairs {
        uf.try_union(g, a, b, cos_gate);
    }
    uf.apply(labels);
}

/// Chart pieces that meet across a partition cut are joined, longest shared
/// cut first, when every face of the union would still pass the growth cost
/// test against the union's mean normal.
fn join_across_cuts(g: &FaceGraph, owner: &[usize], labels: &mut [u32], params: &SegmentParams) {
    let mut shared: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for f in 0..g.len() {
        for k in 0..3 {
            let Some(nb) = g.adj[f][k] else { continue };
            let nb = nb as usize;
            let (a, b) = (labels[f], labels[nb]);
            if owner[f] != owner[nb] && a != b && a != UNASSIGNED && b != UNASSIGNED && a < b {
                *shared.entry((a, b)).or_insert(0.0) += g.edge_len[f][k];
            }
        }
    }
    if shared.is_empty() {
        return;
    }
    let mut pairs: Vec<((u32, u32), f64)> = shared.into_iter().collect();
    pairs.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let count = labels.iter().filter(|&&l| l != UNASSIGNED).max().map_or(0, |m| m + 1) as usize;
    let mut uf = LabelUnion::new(g, labels, count);
    let min_dot = 1.0 - params.cost_threshold;
    for ((a, b), _) in pairs {
        uf.try_union(g, a, b, min_dot);
    }
    uf.apply(labels);
}

/// Union-find over chart labels that tracks members and area-weighted
/// normal sums so unions can be gated on the merged normal cone.
struct LabelUnion {
    parent: Vec<u32>,
    members: Vec<Vec<u32>>,
    nsum: Vec<Vec3>,
}

impl LabelUnion {
    fn new(g: &FaceGraph, labels: &[u32], count: usize) -> Self {
        let mut members = vec![Vec::new(); count];
        let mut nsum = vec![Vec3::zeros(); count];
        for f in 0..g.len() {
            if labels[f] != UNASSIGNED {
                members[labels[f] as usize].push(f as u32);
                nsum[labels[f] as usize] += g.normals[f] * g.areas[f];
            }
        }
        Self {
            parent: (0..count as u32).collect(),
            members,
            nsum,
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            self.parent[x as usize] = self.parent[self.parent[x as usize] as usize];
            x = self.parent[x as usize];
        }
        x
    }

    /// Unites when every member normal has `dot(n, axis) > min_dot`.
    fn try_union(&mut self, g: &FaceGraph, a: u32, b: u32, min_dot: f64) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let Some(axis) = (self.nsum[ra as usize] + self.nsum[rb as usize]).try_normalize(1e-300) else {
            return false;
        };
        let ok = self.members[ra as usize]
            .iter()
            .chain(&self.members[rb as usize])
            .all(|&f| g.areas[f as usize] == 0.0 || g.normals[f as usize].dot(&axis) > min_dot);
        if !ok {
            return false;
        }
        let (keep, gone) = (ra.min(rb), ra.max(rb));
        self.parent[gone as usize] = keep;
        let moved = std::mem::take(&mut self.members[gone as usize]);
        self.members[keep as usize].extend(moved);
        let ns = self.nsum[gone as usize];
        self.nsum[keep as usize] += ns;
        true
    }

    fn apply(&mut self, labels: &mut [u32]) {
        for l in labels.iter_mut() {
            if *l != UNASSIGNED {
                *l = self.find(*l);
            }
        }
    }
}

/// Keeps, per label, only its largest edge-connected piece (by area, then
/// lowest face); the remaining faces become orphans.
fn split_disconnected(g: &FaceGraph, labels: &mut [u32]) {
    let n = g.len();
    let mut comp = vec![u32::MAX; n];
    let mut best: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    let mut comp_area = Vec::new();
    for s in 0..n {
        if comp[s] != u32::MAX || labels[s] == UNASSIGNED {
            continue;
        }
        let id = comp_area.len() as u32;
        let l = labels[s];
        let mut area = 0.0;
        let mut queue = VecDeque::from([s as u32]);
        comp[s] = id;
        while let Some(f) = queue.pop_front() {
            area += g.areas[f as usize];
            for nb in g.adj[f as usize].iter().flatten() {
                if comp[*nb as usize] == u32::MAX && labels[*nb as usize] == l {
                    comp[*nb as usize] = id;
                    queue.push_back(*nb);
                }
            }
        }
        comp_area.push(area);
        // Components are discovered in lowest-face order, so strict `>` keeps
        // the earliest among equal areas.
        let e = best.entry(l).or_insert((area, id));
        if area > e.0 {
            *e = (area, id);
        }
    }
    for f in 0..n {
        let l = labels[f];
        if l != UNASSIGNED && best[&l].1 != comp[f] {
            labels[f] = UNASSIGNED;
        }
    }
}

/// Orphans join the adjacent chart whose mean normal agrees best.
fn assign_orphans(g: &FaceGraph, labels: &mut [u32]) {
    let mut nsum: BTreeMap<u32, Vec3> = BTreeMap::new();
    for f in 0..g.len() {
        if labels[f] != UNASSIGNED {
            *nsum.entry(labels[f]).or_insert_with(Vec3::zeros) += g.normals[f] * g.areas[f];
        }
    }
    let mean: BTreeMap<u32, Vec3> = nsum
        .into_iter()
        .map(|(l, v)| (l, v.try_normalize(1e-300).unwrap_or_else(Vec3::zeros)))
        .collect();
    let mut next_label = labels.iter().filter(|&&l| l != UNASSIGNED).max().map_or(0, |m| m + 1);
    loop {
        let orphans: Vec<usize> = (0..g.len()).filter(|&f| labels[f] == UNASSIGNED).collect();
        if orphans.is_empty() {
            break;
        }
        let mut progress = false;
        for &f in &orphans {
            let mut choice: Option<(f64, u32)> = None;
            for nb in g.adj[f].iter().flatten() {
                let l = labels[*nb as usize];
                if l == UNASSIGNED {
                    continue;
                }
                let c = 1.0 - g.normals[f].dot(&mean.get(&l).copied().unwrap_or_else(Vec3::zeros));
                if choice.is_none_or(|(bc, bl)| c < bc || (c == bc && l < bl)) {
                    choice = Some((c, l));
                }
            }
            if let Some((_, l)) = choice {
                labels[f] = l;
                progress = true;
            }
        }
        if !progress {
            // A region with no labelled neighbour becomes its own chart.
            let f = orphans[0];
            labels[f] = next_label;
            next_label += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn normal_spread_deg(mesh: &TriangleMesh, chart: &Chart) -> f64 {
        let n0 = mesh.face_normal(chart.faces[0] as usize);
        chart
            .faces
            .iter()
            .map(|&f| mesh.face_normal(f as usize).dot(&n0).clamp(-1.0, 1.0).acos().to_degrees())
            .fold(0.0, f64::max)
    }

    fn assert_cover(mesh: &TriangleMesh, charts: &[Chart]) {
        let mut seen = vec![0; mesh.face_count()];
        for c in charts {
            for &f in &c.faces {
                seen[f as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    fn connected(mesh: &TriangleMesh, chart: &Chart) -> bool {
        let adj = mesh.face_adjacency();
        let inside: std::collections::BTreeSet<u32> = chart.faces.iter().copied().collect();
        let mut seen = std::collections::BTreeSet::from([chart.faces[0]]);
        let mut stack = vec![chart.faces[0]];
        while let Some(f) = stack.pop() {
            for nb in adj[f as usize].iter().flatten() {
                if inside.contains(nb) && seen.insert(*nb) {
                    stack.push(*nb);
                }
            }
        }
        seen.len() == chart.faces.len()
    }

    #[test]
    fn cube_gives_six_planar_charts() {
        let m = fixtures::subdivided_cube(1.0, 3);
        let charts = segment_charts(&m, &SegmentParams::default());
        assert_eq!(charts.len(), 6);
        assert_cover(&m, &charts);
        for c in &charts {
            assert!(normal_spread_deg(&m, c) < 1.0);
        }
    }

    #[test]
    fn single_triangle_is_one_chart() {
        let m = TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]);
        assert_eq!(segment_charts(&m, &SegmentParams::default()).len(), 1);
    }

    #[test]
    fn sphere_chart_count_is_pinned() {
        let m = fixtures::icosphere(4);
        let charts = segment_charts(&m, &SegmentParams::default());
        assert!((2..=30).contains(&charts.len()), "{}", charts.len());
        assert_cover(&m, &charts);
        assert!(charts.iter().all(|c| connected(&m, c)));
    }

    #[test]
    fn one_partition_equals_serial() {
        let m = fixtures::displaced_sphere(14, 0.1, 4);
        let p = SegmentParams::default();
        assert_eq!(segment_parallel(&m, 1, 3, &p), segment_charts(&m, &p));
    }

    #[test]
    fn partitioned_cube_reconciles_to_six_charts() {
        let m = fixtures::subdivided_cube(1.0, 6);
        let charts = segment_parallel(&m, 2, 3, &SegmentParams::default());
        assert_eq!(charts.len(), 6);
        for c in &charts {
            assert!(normal_spread_deg(&m, c) < 1.0);
        }
    }

    #[test]
    fn partitions_cover_and_halos_are_disjoint_from_cores() {
        let m = fixtures::icosphere(3);
        let parts = make_partitions(&m, 5, 2);
        assert_eq!(parts.len(), 5);
        let mut seen = vec![0; m.face_count()];
        for p in &parts {
            for &f in &p.core {
                seen[f as usize] += 1;
            }
            assert!(p.halo.iter().all(|h| p.core.binary_search(h).is_err()));
            assert!(!p.halo.is_empty());
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn single_face_chart_is_absorbed() {
        let m = fixtures::plane_grid(3);
        let mut rest: Vec<u32> = (1..m.face_count() as u32).collect();
        rest.sort();
        let charts = vec![Chart::new(vec![0]), Chart::new(rest)];
        assert_eq!(merge_pass(&m, &charts, &SegmentParams::default()).len(), 1);
    }

    #[test]
    fn enclosed_chart_is_absorbed() {
        let m = fixtures::plane_grid(6);
        let g = FaceGraph::new(&m);
        // A 2x2-cell block in the middle: 8 faces, fully surrounded.
        let inner: Vec<u32> = (0..m.face_count() as u32)
            .filter(|&f| {
                let c = g.centroids[f as usize];
                (0.33..0.67).contains(&c.x) && (0.33..0.67).contains(&c.y)
            })
            .collect();
        assert_eq!(inner.len(), 8);
        let outer: Vec<u32> = (0..m.face_count() as u32).filter(|f| !inner.contains(f)).collect();
        let charts = vec![Chart::new(outer), Chart::new(inner)];
        assert_eq!(merge_pass(&m, &charts, &SegmentParams::default()).len(), 1);
    }

    #[test]
    fn perpendicular_planes_are_not_merged() {
        let m = fixtures::subdivided_cube(1.0, 2);
        let charts = segment_charts(&m, &SegmentParams::default());
        // Pairs of adjacent sides share long boundaries but fail the gate.
        assert_eq!(merge_pass(&m, &charts, &SegmentParams::default()).len(), 6);
    }
}
