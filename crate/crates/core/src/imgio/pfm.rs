use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DisparityMap, Field, IntensityImage};
use crate::error::{Error, Result};

/// Decoded PFM payload with rows ordered top-down.
#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for `Pf`, 3 for `PF`.
    pub channels: usize,
    /// Interleaved samples, `width * height * channels` long.
    pub data: Vec<f32>,
}

impl PfmImage {
    /// Invalid pixels are stored as `+inf`, which `into_disparity` maps back to invalid.
    pub fn from_disparity(map: &DisparityMap) -> Self {
        let data = map
            .data()
            .iter()
            .zip(map.valid())
            .map(|(d, ok)| if *ok { *d as f32 } else { f32::INFINITY })
            .collect();
        PfmImage {
            width: map.width(),
            height: map.height(),
            channels: 1,
            data,
        }
    }

    pub fn from_field(field: &Field) -> Self {
        PfmImage {
            width: field.width,
            height: field.height,
            channels: 1,
            data: field.data.iter().map(|v| *v as f32).collect(),
        }
    }

    /// Single-channel payload as a disparity map; NaN, infinities and negative
    /// values become invalid pixels.
    pub fn into_disparity(self) -> Result<DisparityMap> {
        if self.channels != 1 {
            return Err(Error::format(
                "PFM",
                "colour (PF) files cannot hold a disparity map",
            ));
        }
        let data = self.data.into_iter().map(f64::from).collect();
        DisparityMap::new(self.width, self.height, data)
    }

    /// Grayscale payload; colour payloads are converted with the luma weights.
    pub fn into_intensity(self) -> Result<IntensityImage> {
        let data: Vec<f64> = match self.channels {
            1 => self.data.into_iter().map(f64::from).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|c| {
                    0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2])
                })
                .collect(),
        };
        IntensityImage::new(self.width, self.height, data)
    }
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<PfmImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pfm_from(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn header_token<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io("<pfm>", e))?;
        if n == 0 {
            return Err(Error::format("PFM", "truncated header"));
        }
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            return Ok(trimmed.to_string());
        }
    }
}

/// Parses a PFM stream. A negative scale marks little-endian samples; rows are
/// stored bottom-up on disk and returned top-down.
pub fn read_pfm_from<R: BufRead>(mut reader: R) -> Result<PfmImage> {
    let magic = header_token(&mut reader)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::format("PFM", format!("bad magic {other:?}"))),
    };

    let dims = header_token(&mut reader)?;
    let mut parts = dims.split_whitespace();
    let (width, height) = match (parts.next(), parts.next(), parts.next()) {
        (Some(w), Some(h), None) => (
            w.parse::<usize>()
                .map_err(|_| Error::format("PFM", format!("bad width {w:?}")))?,
            h.parse::<usize>()
                .map_err(|_| Error::format("PFM", format!("bad height {h:?}")))?,
        ),
        _ => return Err(Error::format("PFM", format!("bad dimensions {dims:?}"))),
    };

    let scale_line = header_token(&mut reader)?;
    let scale: f32 = scale_line
        .parse()
        .map_err(|_| Error::format("PFM", format!("bad scale {scale_line:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("PFM", format!("bad scale {scale}")));
    }
    let little_endian = scale < 0.0;

    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format("PFM", "dimensions overflow"))?;
    let mut bytes = vec![0u8; count * 4];
    reader.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("PFM", "truncated pixel data")
        } else {
            Error::io("<pfm>", e)
        }
    })?;

    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (file_row, chunk) in bytes.chunks_exact(row_len * 4).enumerate() {
        let y = height - 1 - file_row;
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            data[y * row_len + i] = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }

    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_pfm(img: &PfmImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_pfm_to(img, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes little-endian samples (scale `-1.0`), bottom row first.
pub fn write_pfm_to<W: Write>(img: &PfmImage, w: &mut W) -> std::io::Result<()> {
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width, img.height)?;
    let row_len = img.width * img.channels;
    for y in (0..img.height).rev() {
        for v in &img.data[y * row_len..(y + 1) * row_len] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
