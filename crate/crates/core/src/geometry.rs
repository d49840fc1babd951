//! Occlusion and left-exclusive regions from a single left disparity map.
//!
//! A left pixel `(u, v)` with disparity `d` lands on column `u - d` of the right
//! image. It is *left-exclusive* when that column is negative (`d > u`), i.e. it
//! lies outside the right camera's field of view. Otherwise it is *occluded*
//! when another valid pixel further right in the same row lands on the same
//! right-image column: that pixel has the larger disparity and hides it from the
//! right camera.
//!
//! Real-valued disparities almost never produce exactly equal targets, so two
//! targets collide when they are closer than `bin_tolerance` pixels. With the
//! default of one pixel, integer disparities behave exactly as the equality test.

use std::collections::HashMap;
use std::path::Path;

use image::{ImageBuffer, Luma};
use rayon::prelude::*;

use crate::error::{ensure_same_shape, Error, Result};
use crate::imgio::{CameraCalib, DepthMap, DisparityMap};

pub const DEFAULT_BIN_TOLERANCE: f64 = 1.0;

/// Default depth cap in meters used for evaluation.
pub const DEFAULT_DEPTH_CAP: f64 = 80.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Visible,
    Occluded,
    Exclusive,
    /// No valid disparity at this pixel.
    Invalid,
}

impl Label {
    /// Loss-mask value: 1 for visible pixels, 0 otherwise.
    #[inline]
    pub fn weight(self) -> f64 {
        if self == Label::Visible {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_png_value(self) -> u8 {
        match self {
            Label::Visible => 255,
            Label::Exclusive => 128,
            Label::Occluded => 0,
            Label::Invalid => 64,
        }
    }

    pub fn from_png_value(v: u8) -> Option<Label> {
        match v {
            255 => Some(Label::Visible),
            128 => Some(Label::Exclusive),
            0 => Some(Label::Occluded),
            64 => Some(Label::Invalid),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl OcclusionMask {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        Ok(OcclusionMask {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: Label) -> Self {
        OcclusionMask {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn all_visible(width: usize, height: usize) -> Self {
        Self::filled(width, height, Label::Visible)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: Label) {
        self.labels[y * self.width + x] = label;
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, y: usize) -> &[Label] {
        &self.labels[y * self.width..(y + 1) * self.width]
    }

    /// Binary loss mask: 1 for visible, 0 for occluded, exclusive and invalid.
    pub fn binary(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.weight()).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Fraction of pixels excluded from the loss.
    pub fn masked_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        1.0 - self.count(Label::Visible) as f64 / self.labels.len() as f64
    }

    /// Writes an 8-bit PNG: 255 visible, 128 exclusive, 0 occluded, 64 invalid.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = self.labels.iter().map(|l| l.to_png_value()).collect();
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::format("mask PNG", other.to_string()),
            })
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::format("mask PNG", other.to_string()),
            })?;
        let gray = match img {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(Error::format(
                    "mask PNG",
                    format!("expected 8-bit gray, got {:?}", other.color()),
                ))
            }
        };
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let labels = gray
            .into_raw()
            .into_iter()
            .map(|v| {
                Label::from_png_value(v)
                    .ok_or_else(|| Error::format("mask PNG", format!("unknown label value {v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        OcclusionMask::new(w, h, labels)
    }
}

#[inline]
fn collides(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol
}

fn exclusive(u: usize, d: f64) -> bool {
    d > u as f64
}

/// Reference labelling by enumerating every pixel pair of each row, `O(W^2)` per row.
pub fn occlusion_mask_bruteforce(disp: &DisparityMap, bin_tolerance: f64) -> OcclusionMask {
    let (w, h) = disp.dims();
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for u1 in 0..w {
            if !disp.is_valid(u1, y) {
                labels.push(Label::Invalid);
                continue;
            }
            let d1 = disp.get(u1, y);
            if exclusive(u1, d1) {
                labels.push(Label::Exclusive);
                continue;
            }
            let t1 = u1 as f64 - d1;
            let hidden = (u1 + 1..w)
                .filter(|&u2| disp.is_valid(u2, y))
                .any(|u2| collides(u2 as f64 - disp.get(u2, y), t1, bin_tolerance));
            labels.push(if hidden {
                Label::Occluded
            } else {
                Label::Visible
            });
        }
    }
    OcclusionMask {
        width: w,
        height: h,
        labels,
    }
}

/// Labels every pixel of `disp`; rows are processed in parallel.
///
/// Each row is swept right to left. Targets already seen are bucketed into bins
/// of width `bin_tolerance`, keeping the smallest and largest target per bin.
/// Any target within `bin_tolerance` of the query lies in one of the five bins
/// around it, and since a bin spans less than twice the tolerance, one of its
/// extremes is within tolerance whenever any member is. The result therefore
/// agrees pixel-for-pixel with [`occlusion_mask_bruteforce`].
pub fn occlusion_mask(disp: &DisparityMap, bin_tolerance: f64) -> OcclusionMask {
    let (w, h) = disp.dims();
    let mut labels = vec![Label::Invalid; w * h];
    if w == 0 {
        return OcclusionMask {
            width: w,
            height: h,
            labels,
        };
    }
    labels
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, out)| label_row(disp, y, bin_tolerance, out));
    OcclusionMask {
        width: w,
        height: h,
        labels,
    }
}

fn label_row(disp: &DisparityMap, y: usize, tol: f64, out: &mut [Label]) {
    let w = disp.width();
    // Targets are bounded by |u - d| <= w + max d; beyond ~2^52 bins the floor
    // loses integer resolution, so fall back to the pairwise check.
    let max_target = (0..w)
        .filter(|&u| disp.is_valid(u, y))
        .map(|u| (u as f64 - disp.get(u, y)).abs())
        .fold(0.0, f64::max);
    let binnable = tol > 0.0 && tol.is_finite() && max_target / tol < 4.5e15;

    let mut bins: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut seen: Vec<f64> = Vec::new();
    for u in (0..w).rev() {
        if !disp.is_valid(u, y) {
            out[u] = Label::Invalid;
            continue;
        }
        let d = disp.get(u, y);
        let t = u as f64 - d;
        out[u] = if exclusive(u, d) {
            Label::Exclusive
        } else if binnable {
            let b = (t / tol).floor() as i64;
            let hit = (b - 2..=b + 2).any(|k| {
                bins.get(&k)
                    .is_some_and(|&(lo, hi)| collides(lo, t, tol) || collides(hi, t, tol))
            });
            if hit {
                Label::Occluded
            } else {
                Label::Visible
            }
        } else if seen.iter().any(|&s| collides(s, t, tol)) {
            Label::Occluded
        } else {
            Label::Visible
        };

        if binnable {
            let b = (t / tol).floor() as i64;
            bins.entry(b)
                .and_modify(|e| {
                    e.0 = e.0.min(t);
                    e.1 = e.1.max(t);
                })
                .or_insert((t, t));
        } else {
            seen.push(t);
        }
    }
}

/// `depth = focal * baseline / d`, capped at `cap` meters. Zero or invalid
/// disparities give invalid depth. Pass `f64::INFINITY` to disable the cap.
pub fn disparity_to_depth(disp: &DisparityMap, calib: &CameraCalib, cap: f64) -> DepthMap {
    let fb = calib.focal() * calib.baseline();
    let mut data = Vec::with_capacity(disp.data().len());
    let mut valid = Vec::with_capacity(disp.data().len());
    for (d, ok) in disp.data().iter().zip(disp.valid()) {
        if *ok && *d > 0.0 {
            data.push((fb / d).min(cap));
            valid.push(true);
        } else {
            data.push(0.0);
            valid.push(false);
        }
    }
    DepthMap {
        width: disp.width(),
        height: disp.height(),
        data,
        valid,
    }
}

/// Disparity-error breakdown between occluded (occluded or exclusive) and
/// visible pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OcclusionStats {
    pub mean_error_occluded: f64,
    pub mean_error_visible: f64,
    /// Occluded share of the summed absolute error (0 when the total error is 0).
    pub total_error_share_occluded: f64,
    pub area_share_occluded: f64,
    pub n_occluded: usize,
    pub n_visible: usize,
}

impl OcclusionStats {
    pub fn total_error_share_visible(&self) -> f64 {
        1.0 - self.total_error_share_occluded
    }

    pub fn area_share_visible(&self) -> f64 {
        1.0 - self.area_share_occluded
    }

    /// Ratio of summed occluded error to summed visible error.
    pub fn error_ratio(&self) -> f64 {
        let occ = self.mean_error_occluded * self.n_occluded as f64;
        let vis = self.mean_error_visible * self.n_visible as f64;
        if vis == 0.0 {
            if occ == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            occ / vis
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Mean L1 disparity error and error/area shares per mask class, over pixels
/// where the ground truth is valid. Invalid predictions count as disparity 0.
pub fn occlusion_stats(
    pred: &DisparityMap,
    gt: &DisparityMap,
    mask: &OcclusionMask,
) -> Result<OcclusionStats> {
    ensure_same_shape(pred.dims(), gt.dims())?;
    ensure_same_shape(pred.dims(), mask.dims())?;
    let (mut sum_occ, mut sum_vis) = (0.0, 0.0);
    let (mut n_occ, mut n_vis) = (0usize, 0usize);
    for i in 0..gt.data().len() {
        if !gt.valid()[i] {
            continue;
        }
        let p = if pred.valid()[i] { pred.data()[i] } else { 0.0 };
        let err = (p - gt.data()[i]).abs();
        match mask.labels()[i] {
            Label::Visible => {
                sum_vis += err;
                n_vis += 1;
            }
            Label::Occluded | Label::Exclusive => {
                sum_occ += err;
                n_occ += 1;
            }
            Label::Invalid => {}
        }
    }
    Ok(OcclusionStats {
        mean_error_occluded: ratio(sum_occ, n_occ as f64),
        mean_error_visible: ratio(sum_vis, n_vis as f64),
        total_error_share_occluded: ratio(sum_occ, sum_occ + sum_vis),
        area_share_occluded: ratio(n_occ as f64, (n_occ + n_vis) as f64),
        n_occluded: n_occ,
        n_visible: n_vis,
    })
}
