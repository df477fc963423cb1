//! Incidence-weighted view blending in log space.

use rayon::prelude::*;

use super::project::Partial;
use super::FuseError;

/// View priors for the standard camera order (front, front-left, left,
/// rear-left, rear, rear-right, right, front-right, top, bottom).
pub const STANDARD_PRIORS: [f64; 10] = [1.0, 0.1, 0.01, 0.001, 1.0, 0.001, 0.01, 0.1, 0.3, 0.3];

/// Blended colors and the mask of texels with total weight above `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blended {
    pub color: Vec<[f32; 3]>,
    pub filled: Vec<bool>,
}

/// `log w_k + α log I_k`, `-∞` when the view does not contribute.
#[inline]
fn log_weight(prior: f64, inc: f64, valid: bool, alpha: f64) -> f64 {
    if !valid || inc <= 0.0 || prior <= 0.0 {
        f64::NEG_INFINITY
    } else {
        prior.ln() + alpha * inc.ln()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Per-texel fill mask computable before any color is known: true where
/// `logsumexp_k(log w_k + α log I_k) > log ε`. `valid` optionally restricts
/// each view to texels it can sample.
pub fn fill_mask(incidences: &[Vec<f64>], valid: Option<&[Vec<bool>]>, priors: &[f64], alpha: f64, epsilon: f64) -> Vec<bool> {
    let len = incidences.first().map_or(0, Vec::len);
    let log_eps = epsilon.ln();
    (0..len)
        .into_par_iter()
        .map(|i| {
            let l = (0..incidences.len()).fold(f64::NEG_INFINITY, |acc, k| {
                let ok = valid.is_none_or(|v| v[k][i]);
                log_add_exp(acc, log_weight(priors[k], incidences[k][i], ok, alpha))
            });
            l > log_eps
        })
        .collect()
}

/// `T = Σ w_k I_k^α A_k / (Σ w_k I_k^α + ε)`, evaluated through
/// log-weights shifted by their maximum. Views count only where their
/// partial is valid.
pub fn blend(partials: &[Partial], incidences: &[Vec<f64>], priors: &[f64], alpha: f64, epsilon: f64) -> Result<Blended, FuseError> {
    let k = partials.len();
    if incidences.len() != k || priors.len() != k {
        return Err(FuseError::ShapeMismatch(format!(
            "{k} partials, {} incidence maps, {} priors",
            incidences.len(),
            priors.len()
        )));
    }
    let len = partials.first().map_or(0, |p| p.color.len());
    for (i, (p, inc)) in partials.iter().zip(incidences).enumerate() {
        if p.color.len() != len || p.valid.len() != len || inc.len() != len {
            return Err(FuseError::ShapeMismatch(format!(
                "view {i}: {} colors, {} flags, {} incidences, expected {len}",
                p.color.len(),
                p.valid.len(),
                inc.len()
            )));
        }
    }
    let log_eps = epsilon.ln();
    let texels: Vec<([f32; 3], bool)> = (0..len)
        .into_par_iter()
        .map(|i| {
            let mut lw = [f64::NEG_INFINITY; 32];
            let mut lw_vec;
            let lw: &mut [f64] = if k <= 32 {
                &mut lw[..k]
            } else {
                lw_vec = vec![f64::NEG_INFINITY; k];
                &mut lw_vec
            };
            for v in 0..k {
                lw[v] = log_weight(priors[v], incidences[v][i], partials[v].valid[i], alpha);
            }
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return ([0.0; 3], false);
            }
            // weights relative to the largest, so the dominant view has
            // weight exactly 1 and ε is scaled by the same factor
            let mut sum = 0.0;
            let mut c = [0.0f64; 3];
            for v in 0..k {
                if lw[v] == f64::NEG_INFINITY {
                    continue;
                }
                let w = (lw[v] - m).exp();
                sum += w;
                let a = partials[v].color[i];
                for ch in 0..3 {
                    c[ch] += w * a[ch] as f64;
                }
            }
            let lse = m + sum.ln();
            let denom = sum + (log_eps - m).exp();
            (c.map(|x| (x / denom) as f32), lse > log_eps)
        })
        .collect();
    Ok(Blended {
        color: texels.iter().map(|t| t.0).collect(),
        filled: texels.iter().map(|t| t.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partial(c: [f32; 3], n: usize) -> Partial {
        Partial {
            color: vec![c; n],
            valid: vec![true; n],
        }
    }

    #[test]
    fn single_view_reproduces_its_color() {
        let b = blend(&[partial([0.2, 0.4, 0.6], 1)], &[vec![1.0]], &[1.0], 4.0, 1e-8).unwrap();
        for (got, want) in b.color[0].iter().zip([0.2f32, 0.4, 0.6]) {
            assert!((got - want).abs() < 1e-7);
        }
        assert!(b.filled[0]);
    }

    #[test]
    fn equal_views_average() {
        let b = blend(
            &[partial([1.0, 0.0, 0.0], 1), partial([0.0, 0.0, 1.0], 1)],
            &[vec![0.7], vec![0.7]],
            &[0.5, 0.5],
            4.0,
            1e-8,
        )
        .unwrap();
        assert!((b.color[0][0] - 0.5).abs() < 1e-6 && (b.color[0][2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_incidence_is_unfilled() {
        let b = blend(&[partial([1.0; 3], 2)], &[vec![0.0, 1e-3]], &[1.0], 4.0, 1e-8).unwrap();
        // 1e-12 < ε
        assert_eq!(b.filled, vec![false, false]);
        assert_eq!(fill_mask(&[vec![0.0, 1e-3, 0.5]], None, &[1.0], 4.0, 1e-8), vec![false, false, true]);
    }

    #[test]
    fn shape_mismatch() {
        let r = blend(&[partial([1.0; 3], 2)], &[vec![1.0]], &[1.0], 4.0, 1e-8);
        assert!(matches!(r, Err(FuseError::ShapeMismatch(_))));
    }
}
