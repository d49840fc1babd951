//! Image and disparity containers plus the file formats used by stereo datasets.
//!
//! * PFM (`Pf` single channel, `PF` colour) in either byte order.
//! * KITTI 16-bit disparity PNG (`value / 256`, zero meaning "no data").
//! * 8-bit / 16-bit PNG intensity images, converted to luma in `[0, 1]`.

mod pfm;
mod png;

pub use pfm::{read_pfm, read_pfm_from, write_pfm, write_pfm_to, PfmImage};
pub use png::{
    read_intensity_png, read_kitti_disparity_png, to_grayscale, write_intensity_png,
    write_kitti_disparity_png,
};

use std::path::Path;

use crate::error::{Error, Result};

/// Dense grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} intensities for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(IntensityImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)`; values are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        IntensityImage {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
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
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Left-view disparity field in pixels, with a per-pixel validity flag.
///
/// Valid pixels always hold a finite, non-negative disparity. Invalid pixels keep
/// whatever value they were given but are ignored by every metric and statistic.
#[derive(Clone, Debug)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

/// Equal when shape and validity match and every valid value is equal.
impl PartialEq for DisparityMap {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.valid == other.valid
            && self
                .data
                .iter()
                .zip(&other.data)
                .zip(&self.valid)
                .all(|((a, b), ok)| !ok || a == b)
    }
}

impl DisparityMap {
    /// Wraps raw values; a pixel is valid iff its value is finite and `>= 0`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} disparities for a {width}x{height} map",
                data.len()
            )));
        }
        let valid = data.iter().map(|d| d.is_finite() && *d >= 0.0).collect();
        Ok(DisparityMap {
            width,
            height,
            data,
            valid,
        })
    }

    pub fn with_validity(
        width: usize,
        height: usize,
        data: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if data.len() != width * height || valid.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "buffer lengths {}/{} do not match {width}x{height}",
                data.len(),
                valid.len()
            )));
        }
        if let Some((d, _)) = data
            .iter()
            .zip(&valid)
            .find(|(d, ok)| **ok && !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "valid pixel holds disparity {d}"
            )));
        }
        Ok(DisparityMap {
            width,
            height,
            data,
            valid,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        let valid = data.iter().map(|d| d.is_finite() && *d >= 0.0).collect();
        DisparityMap {
            width,
            height,
            data,
            valid,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
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
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Overwrites a pixel; the validity flag follows the new value.
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = y * self.width + x;
        self.data[i] = value;
        self.valid[i] = value.is_finite() && value >= 0.0;
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.valid[y * self.width + x] = false;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }
}

/// Per-pixel real-valued map (costs, errors, gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Field {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Field {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rectified pinhole pair: focal length in pixels and baseline in meters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct CameraCalib {
    focal: f64,
    baseline: f64,
}

impl CameraCalib {
    pub fn new(focal: f64, baseline: f64) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) || !(baseline > 0.0 && baseline.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "calibration needs focal > 0 and baseline > 0, got {focal} / {baseline}"
            )));
        }
        Ok(CameraCalib { focal, baseline })
    }

    /// KITTI 2015 calibration (color cameras, full resolution).
    pub fn kitti() -> Self {
        CameraCalib {
            focal: 721.5377,
            baseline: 0.54,
        }
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

/// Metric depth per pixel, invalid where the disparity was missing or zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Reads a disparity map, dispatching on the extension (`.pfm` or `.png`).
pub fn read_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => read_pfm(path)?.into_disparity(),
        Some("png") => read_kitti_disparity_png(path),
        _ => Err(Error::format(
            "disparity",
            format!("{}: expected a .pfm or .png file", path.display()),
        )),
    }
}

/// Writes a disparity map, dispatching on the extension (`.pfm` or `.png`).
pub fn write_disparity(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => write_pfm(&PfmImage::from_disparity(map), path),
        Some("png") => write_kitti_disparity_png(map, path),
        _ => Err(Error::format(
            "disparity",
            format!("{}: expected a .pfm or .png file", path.display()),
        )),
    }
}

/// Reads an intensity image from PNG (any bit depth / colour type) or PFM.
pub fn read_intensity(path: impl AsRef<Path>) -> Result<IntensityImage> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => read_pfm(path)?.into_intensity(),
        _ => read_intensity_png(path),
    }
}

/// Writes an intensity image (or any `[0, 1]` map) as 8-bit PNG or as PFM.
pub fn write_intensity(img: &IntensityImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("pfm") => write_pfm(&PfmImage::from_field(&img.to_field()), path),
        _ => write_intensity_png(img, path),
    }
}

pub(crate) fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}
