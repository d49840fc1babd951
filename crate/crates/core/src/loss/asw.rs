//! Adaptive-support-weight aggregation over a `2k x 2k` window.
//!
//! For centre `q` the window spans columns `[qx - k, qx + k - 1]` and rows
//! `[qy - k, qy + k - 1]`, truncated at the image border. Each member `p` is
//! weighted by `exp(-|I(q) - I(p)| / 2)` taken from the guide image.

use rayon::prelude::*;

use crate::error::{ensure_same_shape, Error, Result};
use crate::imgio::{Field, IntensityImage};

/// Weight tables above this many entries are recomputed on the fly instead.
const CACHE_LIMIT: usize = 1 << 24;

#[derive(Clone, Debug)]
pub struct AswKernel {
    width: usize,
    height: usize,
    k: usize,
    guide: Vec<f64>,
    /// `(2k)^2` weights per centre pixel, 0 for slots outside the image.
    cache: Option<Vec<f64>>,
    /// Sum of the weights of each centre's window.
    norm: Vec<f64>,
}

impl AswKernel {
    pub fn new(guide: &IntensityImage, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(
                "ASW half-window k must be >= 1".into(),
            ));
        }
        let (width, height) = guide.dims();
        let mut kernel = AswKernel {
            width,
            height,
            k,
            guide: guide.data().to_vec(),
            cache: None,
            norm: vec![0.0; width * height],
        };
        let side = 2 * k;
        let entries = width * height * side * side;
        if entries <= CACHE_LIMIT && width > 0 {
            let mut cache = vec![0.0; entries];
            cache
                .par_chunks_mut(side * side)
                .enumerate()
                .for_each(|(q, slots)| {
                    let (qx, qy) = (q % width, q / width);
                    for oy in 0..side {
                        for ox in 0..side {
                            if let Some(p) = kernel.member(qx, qy, ox, oy) {
                                slots[oy * side + ox] = kernel.raw_weight(q, p);
                            }
                        }
                    }
                });
            kernel.norm = cache.chunks(side * side).map(|s| s.iter().sum()).collect();
            kernel.cache = Some(cache);
        } else {
            let norm: Vec<f64> = (0..width * height)
                .into_par_iter()
                .map(|q| {
                    let (qx, qy) = (q % width, q / width);
                    let mut sum = 0.0;
                    for oy in 0..side {
                        for ox in 0..side {
                            if let Some(p) = kernel.member(qx, qy, ox, oy) {
                                sum += kernel.raw_weight(q, p);
                            }
                        }
                    }
                    sum
                })
                .collect();
            kernel.norm = norm;
        }
        Ok(kernel)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Flat index of slot `(ox, oy)` in the window of centre `(qx, qy)`, if inside the image.
    #[inline]
    fn member(&self, qx: usize, qy: usize, ox: usize, oy: usize) -> Option<usize> {
        let x = (qx + ox).checked_sub(self.k)?;
        let y = (qy + oy).checked_sub(self.k)?;
        (x < self.width && y < self.height).then_some(y * self.width + x)
    }

    #[inline]
    fn raw_weight(&self, q: usize, p: usize) -> f64 {
        (-(self.guide[q] - self.guide[p]).abs() / 2.0).exp()
    }

    #[inline]
    fn weight(&self, q: usize, p: usize, slot: usize) -> f64 {
        match &self.cache {
            Some(c) => c[q * 4 * self.k * self.k + slot],
            None => self.raw_weight(q, p),
        }
    }

    /// Weighted window mean of `cost` at every pixel.
    pub fn aggregate(&self, cost: &[f64]) -> Vec<f64> {
        let (w, side) = (self.width, 2 * self.k);
        (0..w * self.height)
            .into_par_iter()
            .map(|q| {
                let (qx, qy) = (q % w, q / w);
                let mut acc = 0.0;
                for oy in 0..side {
                    for ox in 0..side {
                        if let Some(p) = self.member(qx, qy, ox, oy) {
                            acc += self.weight(q, p, oy * side + ox) * cost[p];
                        }
                    }
                }
                acc / self.norm[q]
            })
            .collect()
    }

    /// Transposed aggregation: `out[p] = sum_q upstream[q] * w(q, p) / norm(q)`
    /// over every centre `q` whose window contains `p`.
    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        let (w, h, k) = (self.width, self.height, self.k);
        let side = 2 * k;
        let scaled: Vec<f64> = upstream
            .iter()
            .zip(&self.norm)
            .map(|(u, n)| u / n)
            .collect();
        (0..w * h)
            .into_par_iter()
            .map(|p| {
                let (px, py) = (p % w, p / w);
                // p = q + o - k  =>  q in [p - k + 1, p + k]
                let qx_lo = (px + 1).saturating_sub(k);
                let qx_hi = (px + k).min(w - 1);
                let qy_lo = (py + 1).saturating_sub(k);
                let qy_hi = (py + k).min(h - 1);
                let mut acc = 0.0;
                for qy in qy_lo..=qy_hi {
                    let oy = py + k - qy;
                    for qx in qx_lo..=qx_hi {
                        let q = qy * w + qx;
                        if scaled[q] == 0.0 {
                            continue;
                        }
                        let ox = px + k - qx;
                        acc += scaled[q] * self.weight(q, p, oy * side + ox);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Aggregates a per-pixel cost with adaptive support weights from `guide`.
pub fn asw_aggregate(cost: &Field, guide: &IntensityImage, k: usize) -> Result<Field> {
    ensure_same_shape(cost.dims(), guide.dims())?;
    let kernel = AswKernel::new(guide, k)?;
    Ok(Field {
        width: cost.width,
        height: cost.height,
        data: kernel.aggregate(&cost.data),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_cost_is_preserved() {
        let guide = IntensityImage::from_fn(7, 6, |x, y| ((x * 5 + y * 3) % 7) as f64 / 6.0);
        let cost = Field::from_fn(7, 6, |_, _| 0.42);
        let out = asw_aggregate(&cost, &guide, 2).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.42).abs() < 1e-14));
    }

    #[test]
    fn constant_guide_gives_plain_mean() {
        let guide = IntensityImage::constant(5, 1, 0.3);
        let cost = Field::from_fn(5, 1, |x, _| x as f64);
        let out = asw_aggregate(&cost, &guide, 1).unwrap();
        // k = 1: window covers columns [x - 1, x].
        let expected = [0.0, 0.5, 1.5, 2.5, 3.5];
        for (o, e) in out.data.iter().zip(expected) {
            assert!((o - e).abs() < 1e-14);
        }
    }

    #[test]
    fn k_zero_rejected() {
        let guide = IntensityImage::constant(2, 2, 0.0);
        assert!(AswKernel::new(&guide, 0).is_err());
    }
}
