//! Left-image reconstruction by bilinear sampling of the right image.

use rayon::prelude::*;

use crate::error::{ensure_same_shape, Result};
use crate::imgio::{DisparityMap, Field, IntensityImage};

/// Bilinear interpolation with coordinates clamped to the image rectangle.
/// Exact at integer coordinates. Returns 0 for an empty image.
pub fn bilinear_sample(img: &IntensityImage, x: f64, y: f64) -> f64 {
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return 0.0;
    }
    let x = clamp_coord(x, w);
    let y = clamp_coord(y, h);
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn clamp_coord(c: f64, len: usize) -> f64 {
    if c.is_nan() {
        0.0
    } else {
        c.clamp(0.0, (len - 1) as f64)
    }
}

/// Linear interpolation along one row, plus the slope `dI/dx` at `x`.
///
/// The slope is the one of the segment `(i, i + 1]` that contains `x`, i.e. the
/// left limit at integer positions. Outside `(0, w - 1]` the clamped signal is
/// flat and the slope is 0.
#[inline]
pub(crate) fn sample_row(row: &[f64], x: f64) -> (f64, f64) {
    let w = row.len();
    let last = (w - 1) as f64;
    if w == 1 || x.is_nan() || x <= 0.0 {
        return (row[0], 0.0);
    }
    if x > last {
        return (row[w - 1], 0.0);
    }
    let i = (x.ceil() as usize).clamp(1, w - 1) - 1;
    let f = x - i as f64;
    (row[i] * (1.0 - f) + row[i + 1] * f, row[i + 1] - row[i])
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    /// Left image rebuilt from the right view.
    pub image: IntensityImage,
    /// False where `u - d` falls outside `[0, W - 1]`; those pixels use the clamped edge.
    pub in_bounds: Vec<bool>,
    /// `dI~/dd` per pixel, i.e. minus the horizontal slope at the sample point.
    pub ddisp: Field,
}

/// Samples `right` at `(u - d(u, v), v)` for every left pixel.
///
/// Invalid disparities are treated as 0 (identity sample); their derivative is 0.
pub fn reconstruct_left(
    right: &IntensityImage,
    disp: &DisparityMap,
) -> Result<ReconstructionResult> {
    ensure_same_shape(right.dims(), disp.dims())?;
    let (w, h) = right.dims();
    let mut image = vec![0.0; w * h];
    let mut ddisp = vec![0.0; w * h];
    let mut in_bounds = vec![true; w * h];
    if w > 0 {
        image
            .par_chunks_mut(w)
            .zip(ddisp.par_chunks_mut(w))
            .zip(in_bounds.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, ((img_row, dd_row), ib_row))| {
                let src = right.row(y);
                for u in 0..w {
                    let valid = disp.is_valid(u, y);
                    let d = if valid { disp.get(u, y) } else { 0.0 };
                    let x = u as f64 - d;
                    let (v, slope) = sample_row(src, x);
                    img_row[u] = v;
                    dd_row[u] = if valid { -slope } else { 0.0 };
                    ib_row[u] = (0.0..=(w - 1) as f64).contains(&x);
                }
            });
    }
    Ok(ReconstructionResult {
        image: IntensityImage::from_fn(w, h, |x, y| image[y * w + x]),
        in_bounds,
        ddisp: Field {
            width: w,
            height: h,
            data: ddisp,
        },
    })
}

/// Per-pixel `|left - recon|`.
pub fn reconstruction_error_map(left: &IntensityImage, recon: &IntensityImage) -> Result<Field> {
    ensure_same_shape(left.dims(), recon.dims())?;
    Ok(Field {
        width: left.width(),
        height: left.height(),
        data: left
            .data()
            .iter()
            .zip(recon.data())
            .map(|(a, b)| (a - b).abs())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_at_integer_is_exact() {
        let img = IntensityImage::from_fn(4, 3, |x, y| (x + 4 * y) as f64 / 12.0);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(bilinear_sample(&img, x as f64, y as f64), img.get(x, y));
            }
        }
    }

    #[test]
    fn sample_two_pixel_row() {
        let img = IntensityImage::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.25, 0.0), 0.25);
        assert_eq!(bilinear_sample(&img, -3.0, 0.0), 0.0);
        assert_eq!(bilinear_sample(&img, 7.0, 0.0), 1.0);
    }

    #[test]
    fn row_slope_uses_left_limit() {
        let row = [0.0, 0.2, 0.8];
        assert_eq!(sample_row(&row, 1.0), (0.2, 0.2));
        assert_eq!(sample_row(&row, 2.0), (0.8, 0.6000000000000001));
        assert_eq!(sample_row(&row, 0.0), (0.0, 0.0));
        assert_eq!(sample_row(&row, 2.5).1, 0.0);
    }

    #[test]
    fn zero_disparity_is_identity() {
        let right = IntensityImage::from_fn(5, 2, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0);
        let disp = DisparityMap::constant(5, 2, 0.0);
        let r = reconstruct_left(&right, &disp).unwrap();
        assert_eq!(r.image, right);
        assert!(r.in_bounds.iter().all(|b| *b));
    }

    #[test]
    fn constant_image_is_invariant() {
        let right = IntensityImage::constant(6, 2, 0.37);
        let disp = DisparityMap::from_fn(6, 2, |x, y| (x as f64 * 1.3 + y as f64) % 4.0);
        let r = reconstruct_left(&right, &disp).unwrap();
        assert!(r.image.data().iter().all(|v| (*v - 0.37).abs() < 1e-15));
        assert!(r.ddisp.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_shift_on_ramp() {
        let right = IntensityImage::from_fn(8, 1, |x, _| x as f64 / 7.0);
        let disp = DisparityMap::constant(8, 1, 1.0);
        let r = reconstruct_left(&right, &disp).unwrap();
        assert!(!r.in_bounds[0]);
        for u in 1..8 {
            assert!(r.in_bounds[u]);
            assert!((r.image.get(u, 0) - right.get(u - 1, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn error_map_values() {
        let a = IntensityImage::constant(2, 1, 0.2);
        let b = IntensityImage::constant(2, 1, 0.7);
        let e = reconstruction_error_map(&a, &b).unwrap();
        assert!(e.data.iter().all(|v| (*v - 0.5).abs() < 1e-15));
        assert!(reconstruction_error_map(&a, &a)
            .unwrap()
            .data
            .iter()
            .all(|v| *v == 0.0));
        let c = IntensityImage::constant(1, 1, 0.0);
        assert!(reconstruction_error_map(&a, &c).is_err());
    }
}
