//! 3x3 windowed SSIM with reflected borders, and its derivative with respect to
//! the second image.

use crate::error::{ensure_same_shape, Result};
use crate::imgio::{Field, IntensityImage};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let last = n as isize - 1;
    let r = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    r.clamp(0, last) as usize
}

#[inline]
fn window(x: usize, y: usize, w: usize, h: usize) -> [usize; 9] {
    let mut idx = [0usize; 9];
    let mut k = 0;
    for dy in -1isize..=1 {
        let yy = reflect(y as isize + dy, h);
        for dx in -1isize..=1 {
            idx[k] = yy * w + reflect(x as isize + dx, w);
            k += 1;
        }
    }
    idx
}

struct WindowStats {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

#[inline]
fn stats(a: &[f64], b: &[f64], idx: &[usize; 9]) -> WindowStats {
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    let mu_a = sa / 9.0;
    let mu_b = sb / 9.0;
    WindowStats {
        mu_a,
        mu_b,
        var_a: saa / 9.0 - mu_a * mu_a,
        var_b: sbb / 9.0 - mu_b * mu_b,
        cov: sab / 9.0 - mu_a * mu_b,
    }
}

#[inline]
fn ssim_terms(s: &WindowStats, c1: f64, c2: f64) -> (f64, f64, f64, f64) {
    (
        2.0 * s.mu_a * s.mu_b + c1,
        2.0 * s.cov + c2,
        s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1,
        s.var_a + s.var_b + c2,
    )
}

pub(crate) fn ssim_map_with(a: &IntensityImage, b: &IntensityImage, c1: f64, c2: f64) -> Field {
    let (w, h) = a.dims();
    Field::from_fn(w, h, |x, y| {
        let s = stats(a.data(), b.data(), &window(x, y, w, h));
        let (n1, n2, d1, d2) = ssim_terms(&s, c1, c2);
        (n1 * n2) / (d1 * d2)
    })
}

/// Per-pixel SSIM using 3x3 uniform local statistics and the standard constants.
pub fn ssim_map(a: &IntensityImage, b: &IntensityImage) -> Result<Field> {
    ensure_same_shape(a.dims(), b.dims())?;
    Ok(ssim_map_with(a, b, SSIM_C1, SSIM_C2))
}

/// Accumulates `sum_p upstream[p] * dSSIM(p)/db[j]` for every pixel `j` of `b`.
pub(crate) fn ssim_backward_b(
    a: &IntensityImage,
    b: &IntensityImage,
    upstream: &[f64],
    c1: f64,
    c2: f64,
) -> Vec<f64> {
    let (w, h) = a.dims();
    let (ad, bd) = (a.data(), b.data());
    let mut grad = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let g = upstream[y * w + x];
            if g == 0.0 {
                continue;
            }
            let idx = window(x, y, w, h);
            let s = stats(ad, bd, &idx);
            let (n1, n2, d1, d2) = ssim_terms(&s, c1, c2);
            let den = d1 * d2;
            let ssim = n1 * n2 / den;
            let c_mean = 2.0 * s.mu_a * n2 / den - 2.0 * ssim * s.mu_b / d1;
            let c_cov = 2.0 * n1 / den;
            let c_var = 2.0 * ssim / d2;
            for &j in &idx {
                let dj = (c_mean + c_cov * (ad[j] - s.mu_a) - c_var * (bd[j] - s.mu_b)) / 9.0;
                grad[j] += g * dj;
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(2, 5), 2);
        assert_eq!(reflect(-1, 1), 0);
        assert_eq!(reflect(2, 2), 0);
    }

    #[test]
    fn self_similarity_is_one() {
        let a = IntensityImage::from_fn(6, 5, |x, y| ((x * 13 + y * 7) % 11) as f64 / 10.0);
        let s = ssim_map(&a, &a).unwrap();
        assert!(s.data.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_images_closed_form() {
        let a = IntensityImage::constant(4, 4, 0.0);
        let b = IntensityImage::constant(4, 4, 1.0);
        let s = ssim_map(&a, &b).unwrap();
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!(s.data.iter().all(|v| (v - expected).abs() < 1e-15));
    }
}
