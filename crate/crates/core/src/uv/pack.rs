//! Skyline atlas packing with a shared texel density.

use super::{Chart, UvError};
use crate::mesh::cross2;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPlacement {
    /// Rotation applied to the chart UVs before placement (minimum-area
    /// bounding rectangle), in radians.
    pub angle: f64,
    /// Additional quarter turn so the rectangle lies landscape.
    pub rotated: bool,
    /// Minimum corner of the rotated chart bounds, in chart units.
    pub origin: Vec2,
    /// Extent of the rotated chart bounds before the quarter turn.
    pub extent: Vec2,
    /// Texels per chart unit (shared by all charts).
    pub scale: f64,
    /// Cell in texels `[x, y, w, h]`, including the trailing padding.
    pub cell: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasLayout {
    pub resolution: usize,
    pub padding: usize,
    pub placements: Vec<ChartPlacement>,
}

impl AtlasLayout {
    /// Maps a chart-local UV to atlas coordinates in `[0, 1]²`.
    pub fn map(&self, chart: usize, uv: Vec2) -> Vec2 {
        let p = &self.placements[chart];
        let (s, c) = p.angle.sin_cos();
        let r = Vec2::new(c * uv.x - s * uv.y, s * uv.x + c * uv.y) - p.origin;
        let r = if p.rotated { Vec2::new(r.y, p.extent.x - r.x) } else { r };
        let texel = Vec2::new(p.cell[0] as f64, p.cell[1] as f64) + r * p.scale;
        texel / self.resolution as f64
    }

    /// Cells with padding, pairwise: `true` when none overlap and all lie
    /// inside the atlas.
    pub fn is_valid(&self) -> bool {
        let inside = self
            .placements
            .iter()
            .all(|p| p.cell[0] + p.cell[2] <= self.resolution && p.cell[1] + p.cell[3] <= self.resolution);
        inside && overlapping_pairs(&self.placements).is_empty()
    }

    /// Fraction of atlas area covered by chart triangles.
    pub fn occupancy(&self, charts: &[Chart]) -> f64 {
        let covered: f64 = charts
            .iter()
            .zip(&self.placements)
            .map(|(c, p)| c.uv_area() * p.scale * p.scale)
            .sum();
        covered / (self.resolution * self.resolution) as f64
    }
}

/// Exhaustive O(n²) rectangle intersection check.
pub fn overlapping_pairs(placements: &[ChartPlacement]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..placements.len() {
        for j in i + 1..placements.len() {
            let a = placements[i].cell;
            let b = placements[j].cell;
            if a[0] < b[0] + b[2] && b[0] < a[0] + a[2] && a[1] < b[1] + b[3] && b[1] < a[1] + a[3] {
                out.push((i, j));
            }
        }
    }
    out
}

fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(&(hull[hull.len() - 1] - hull[hull.len() - 2]), &(p - hull[hull.len() - 2])) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Rotation angle and extents of the minimum-area bounding rectangle.
fn min_area_rect(points: &[Vec2]) -> (f64, Vec2, Vec2) {
    let hull = convex_hull(points.to_vec());
    let bounds = |angle: f64| {
        let (s, c) = angle.sin_cos();
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in &hull {
            let r = Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
            lo = lo.inf(&r);
            hi = hi.sup(&r);
        }
        (lo, hi)
    };
    let mut best = (0.0, bounds(0.0));
    let area = |b: &(Vec2, Vec2)| (b.1.x - b.0.x) * (b.1.y - b.0.y);
    for i in 0..hull.len() {
        let e = hull[(i + 1) % hull.len()] - hull[i];
        if e.norm() == 0.0 {
            continue;
        }
        let angle = -e.y.atan2(e.x);
        let b = bounds(angle);
        if area(&b) < area(&best.1) - 1e-15 {
            best = (angle, b);
        }
    }
    (best.0, best.1 .0, best.1 .1)
}

struct Item {
    index: usize,
    angle: f64,
    origin: Vec2,
    extent: Vec2,
    w: f64,
    h: f64,
    rotated: bool,
}

/// Skyline placement. Each rectangle may be turned a quarter; the position
/// with the lowest top edge wins, ties broken by the lower left corner.
/// Returns `(x, y, turned)` per rectangle or `None` when they do not fit.
fn skyline(sizes: &[(usize, usize)], width: usize, height: usize) -> Option<Vec<(usize, usize, bool)>> {
    // Segments (x, width, y), sorted by x, covering [0, width).
    let mut sky: Vec<(usize, usize, usize)> = vec![(0, width, 0)];
    let mut out = Vec::with_capacity(sizes.len());
    for &(w0, h0) in sizes {
        let mut best: Option<(usize, usize, usize, bool)> = None; // (top, y, x, turned)
        for turned in [false, true] {
            let (w, h) = if turned { (h0, w0) } else { (w0, h0) };
            if turned && w0 == h0 {
                break;
            }
            for i in 0..sky.len() {
                let x = sky[i].0;
                if x + w > width {
                    break;
                }
                let mut y = 0;
                let mut j = i;
                while j < sky.len() && sky[j].0 < x + w {
                    y = y.max(sky[j].2);
                    j += 1;
                }
                let key = (y + h, y, x, turned);
                if y + h <= height && best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let (_, y, x, turned) = best?;
        let (w, h) = if turned { (h0, w0) } else { (w0, h0) };
        out.push((x, y, turned));
        // Replace the covered span with the new segment.
        let top = y + h;
        let mut next: Vec<(usize, usize, usize)> = Vec::with_capacity(sky.len() + 2);
        for &(sx, sw, sy) in &sky {
            let end = sx + sw;
            if end <= x || sx >= x + w {
                next.push((sx, sw, sy));
                continue;
            }
            if sx < x {
                next.push((sx, x - sx, sy));
            }
            if end > x + w {
                next.push((x + w, end - (x + w), sy));
            }
        }
        next.push((x, w, top));
        next.sort_by_key(|s| s.0);
        // Merge neighbours of equal height.
        sky.clear();
        for s in next {
            if let Some(last) = sky.last_mut() {
                if last.2 == s.2 && last.0 + last.1 == s.0 {
                    last.1 += s.1;
                    continue;
                }
            }
            sky.push(s);
        }
    }
    Some(out)
}

/// Cells `[x, y, w, h]` and quarter-turn flags per item.
fn try_pack(items: &[Item], order: &[usize], scale: f64, resolution: usize, padding: usize) -> Option<(Vec<[usize; 4]>, Vec<bool>)> {
    let avail = resolution.checked_sub(padding)?;
    let sizes: Vec<(usize, usize)> = order
        .iter()
        .map(|&i| {
            let it = &items[i];
            (((it.w * scale).ceil() as usize).max(1) + padding, ((it.h * scale).ceil() as usize).max(1) + padding)
        })
        .collect();
    let pos = skyline(&sizes, avail, avail)?;
    let mut cells = vec![[0; 4]; items.len()];
    let mut turned = vec![false; items.len()];
    for (k, &i) in order.iter().enumerate() {
        let (w, h) = if pos[k].2 { (sizes[k].1, sizes[k].0) } else { sizes[k] };
        cells[i] = [pos[k].0 + padding, pos[k].1 + padding, w, h];
        turned[i] = pos[k].2;
    }
    Some((cells, turned))
}

/// Packs parameterized charts into a square atlas. The largest shared scale
/// that fits is found by bisection; if nothing fits the resolution is
/// doubled once before giving up.
pub fn pack_atlas(charts: &[Chart], resolution: usize, padding: usize) -> Result<AtlasLayout, UvError> {
    let items: Vec<Item> = charts
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let pts: Vec<Vec2> = c.uv.iter().flatten().copied().collect();
            let (angle, lo, hi) = min_area_rect(&pts);
            let (w, h) = ((hi.x - lo.x).max(1e-12), (hi.y - lo.y).max(1e-12));
            Item {
                index,
                angle,
                origin: lo,
                extent: Vec2::new(w, h),
                w: w.max(h),
                h: w.min(h),
                rotated: h > w,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        items[b]
            .h
            .total_cmp(&items[a].h)
            .then(items[b].w.total_cmp(&items[a].w))
            .then(items[a].index.cmp(&items[b].index))
    });
    let mut res = resolution;
    for attempt in 0..2 {
        if items.is_empty() {
            return Ok(AtlasLayout {
                resolution: res,
                padding,
                placements: Vec::new(),
            });
        }
        let inner = res.saturating_sub(2 * padding) as f64;
        let max_dim = items.iter().map(|i| i.w).fold(0.0, f64::max);
        let total: f64 = items.iter().map(|i| i.w * i.h).sum();
        let hi_bound = (inner / max_dim).min((inner * inner / total).sqrt());
        let mut lo = hi_bound * 1e-6;
        let mut best = try_pack(&items, &order, lo, res, padding).map(|c| (lo, c));
        if best.is_some() {
            let mut hi = hi_bound;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                match try_pack(&items, &order, mid, res, padding) {
                    Some(c) => {
                        lo = mid;
                        best = Some((mid, c));
                    }
                    None => hi = mid,
                }
            }
            let (scale, (cells, turned)) = best.expect("a feasible scale was found");
            let placements = items
                .iter()
                .zip(cells)
                .zip(turned)
                .map(|((it, cell), t)| ChartPlacement {
                    angle: it.angle,
                    rotated: it.rotated != t,
                    origin: it.origin,
                    extent: it.extent,
                    scale,
                    cell,
                })
                .collect();
            return Ok(AtlasLayout {
                resolution: res,
                padding,
                placements,
            });
        }
        if attempt == 0 {
            res *= 2;
        }
    }
    Err(UvError::PackOverflow {
        charts: charts.len(),
        resolution: res,
    })
}
