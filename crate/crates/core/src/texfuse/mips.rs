//! Lanczos-2 mip chain with light per-level sharpening.

use crate::render::ColorImage;

/// Unsharp-mask strength applied to every level after the first.
pub const UNSHARP_STRENGTH: f32 = 0.2;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Lanczos window with `a = 2`.
pub fn lanczos2(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        sinc(x) * sinc(x / 2.0)
    }
}

/// Normalized weights of the 8 source pixels `2i-3 ..= 2i+4` feeding output
/// pixel `i` of a 2× reduction. Output centers sit at source coordinate
/// `2i + 1`, so source pixel `2i + k` lies `(k - 0.5) / 2` output pixels away.
pub fn half_weights() -> [f64; 8] {
    let mut w = [0.0; 8];
    for (slot, k) in (-3i32..=4).enumerate() {
        w[slot] = lanczos2((k as f64 - 0.5) / 2.0);
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

fn reduce_axis(src: &[[f32; 3]], w: usize, h: usize, horizontal: bool) -> (Vec<[f32; 3]>, usize, usize) {
    let k = half_weights();
    let (ow, oh) = if horizontal { (w.div_ceil(2), h) } else { (w, h.div_ceil(2)) };
    let mut out = vec![[0.0f32; 3]; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = [0.0f64; 3];
            for (slot, &wk) in k.iter().enumerate() {
                let off = slot as isize - 3;
                let (sx, sy) = if horizontal {
                    ((2 * x as isize + off).clamp(0, w as isize - 1) as usize, y)
                } else {
                    (x, (2 * y as isize + off).clamp(0, h as isize - 1) as usize)
                };
                let c = src[sy * w + sx];
                for ch in 0..3 {
                    acc[ch] += wk * c[ch] as f64;
                }
            }
            out[y * ow + x] = acc.map(|v| v as f32);
        }
    }
    (out, ow, oh)
}

/// Separable 2× Lanczos-2 reduction with edge clamping.
pub fn lanczos_downsample(img: &ColorImage) -> ColorImage {
    let (t, w, h) = reduce_axis(&img.data, img.width, img.height, true);
    let (data, width, height) = reduce_axis(&t, w, h, false);
    ColorImage { width, height, data }
}

/// `img + s (img - blur(img))` with a clamped 3×3 binomial blur.
pub fn unsharp(img: &ColorImage, strength: f32) -> ColorImage {
    let (w, h) = (img.width, img.height);
    let at = |x: isize, y: isize| img.data[(y.clamp(0, h as isize - 1) as usize) * w + x.clamp(0, w as isize - 1) as usize];
    let k = [1.0f32, 2.0, 1.0];
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut blur = [0.0f32; 3];
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let wgt = k[(dx + 1) as usize] * k[(dy + 1) as usize] / 16.0;
                    let c = at(x + dx, y + dy);
                    for ch in 0..3 {
                        blur[ch] += wgt * c[ch];
                    }
                }
            }
            let c = at(x, y);
            data.push([0, 1, 2].map(|ch| c[ch] + strength * (c[ch] - blur[ch])));
        }
    }
    ColorImage { width: w, height: h, data }
}

/// Level 0 is `img`; each further level halves it (rounding up) until a
/// side reaches 1 or `levels` levels exist.
pub fn build_mips(img: &ColorImage, levels: usize) -> Vec<ColorImage> {
    let mut chain = vec![img.clone()];
    while chain.len() < levels.max(1) {
        let last = chain.last().expect("chain is never empty");
        if last.width <= 1 && last.height <= 1 {
            break;
        }
        chain.push(unsharp(&lanczos_downsample(last), UNSHARP_STRENGTH));
    }
    chain
}

/// Full chain down to 1×1.
pub fn full_mip_count(width: usize, height: usize) -> usize {
    (usize::BITS - width.max(height).max(1).leading_zeros()) as usize
}

/// Bilinear fetch at continuous pixel coordinates (centers at `+0.5`),
/// clamped at the border.
pub fn bilinear(img: &ColorImage, x: f64, y: f64) -> [f64; 3] {
    let x = x - 0.5;
    let y = y - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let cx = |v: f64| v.clamp(0.0, (img.width - 1) as f64) as usize;
    let cy = |v: f64| v.clamp(0.0, (img.height - 1) as f64) as usize;
    let (xa, xb, ya, yb) = (cx(x0), cx(x0 + 1.0), cy(y0), cy(y0 + 1.0));
    let (a, b, c, d) = (img.get(xa, ya), img.get(xb, ya), img.get(xa, yb), img.get(xb, yb));
    [0, 1, 2].map(|k| {
        let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
        let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
        top * (1.0 - fy) + bot * fy
    })
}

/// Trilinear fetch: `(x, y)` in level-0 pixels, `lod` clamped to the chain.
pub fn trilinear(chain: &[ColorImage], x: f64, y: f64, lod: f64) -> [f64; 3] {
    let top = (chain.len() - 1) as f64;
    let lod = lod.clamp(0.0, top);
    let l0 = lod.floor();
    let t = lod - l0;
    let at = |l: usize| {
        let s = (1usize << l) as f64;
        bilinear(&chain[l], x / s, y / s)
    };
    let a = at(l0 as usize);
    if t == 0.0 {
        return a;
    }
    let b = at(l0 as usize + 1);
    [0, 1, 2].map(|k| a[k] * (1.0 - t) + b[k] * t)
}
