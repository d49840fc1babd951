use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, RgbImage};

use super::{DisparityMap, IntensityImage};
use crate::error::{Error, Result};

const KITTI_SCALE: f64 = 256.0;

fn open_png(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format("PNG", format!("{}: {other}", path.display())),
    })
}

fn save_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format("PNG", format!("{}: {other}", path.display())),
    }
}

/// Reads a KITTI disparity PNG: `disparity = stored / 256`, `stored == 0` is invalid.
pub fn read_kitti_disparity_png(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    let img = match open_png(path)? {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(Error::format(
                "KITTI PNG",
                format!(
                    "{}: expected 16-bit single-channel, got {:?}",
                    path.display(),
                    other.color()
                ),
            ))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    let data = raw.iter().map(|v| f64::from(*v) / KITTI_SCALE).collect();
    let valid = raw.iter().map(|v| *v != 0).collect();
    DisparityMap::with_validity(w, h, data, valid)
}

/// Writes a KITTI disparity PNG. Valid disparities must lie in `[0, 256)`; a valid
/// disparity below half a quantization step is stored as 1 so it stays valid.
pub fn write_kitti_disparity_png(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut raw = Vec::with_capacity(map.width() * map.height());
    for (d, ok) in map.data().iter().zip(map.valid()) {
        if !*ok {
            raw.push(0u16);
            continue;
        }
        if !(0.0..256.0).contains(d) {
            return Err(Error::InvalidArgument(format!(
                "disparity {d} outside the KITTI PNG range [0, 256)"
            )));
        }
        let q = (d * KITTI_SCALE).round().clamp(1.0, f64::from(u16::MAX));
        raw.push(q as u16);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| save_err(path, e))
}

/// Luma conversion `(0.299 R + 0.587 G + 0.114 B) / 255`.
pub fn to_grayscale(rgb: &RgbImage) -> IntensityImage {
    IntensityImage::from_fn(rgb.width() as usize, rgb.height() as usize, |x, y| {
        let p = rgb.get_pixel(x as u32, y as u32).0;
        (0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])) / 255.0
    })
}

/// Reads any PNG as an intensity image. Gray images are scaled by their bit depth,
/// colour images go through [`to_grayscale`] (alpha is dropped).
pub fn read_intensity_png(path: impl AsRef<Path>) -> Result<IntensityImage> {
    let path = path.as_ref();
    let img = open_png(path)?;
    Ok(match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            IntensityImage::from_fn(w, h, |x, y| {
                f64::from(g.get_pixel(x as u32, y as u32).0[0]) / 255.0
            })
        }
        DynamicImage::ImageLuma16(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            IntensityImage::from_fn(w, h, |x, y| {
                f64::from(g.get_pixel(x as u32, y as u32).0[0]) / f64::from(u16::MAX)
            })
        }
        other => to_grayscale(&other.to_rgb8()),
    })
}

/// Writes an 8-bit grayscale PNG (`round(255 * v)`).
pub fn write_intensity_png(img: &IntensityImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| save_err(path, e))
}
