//! Occlusion-aware post-processing: refill occluded and leading left-exclusive
//! disparities from the means of their non-occluded row neighbours.
//!
//! Each row is handled independently:
//!
//! 1. The leading run of occluded / exclusive columns (the strip the right camera
//!    cannot see at the left image border) is filled right to left. Each pixel
//!    gets the mean of the `n` nearest usable columns to its right, where usable
//!    means visible or already filled in this pass.
//! 2. The rest of the row is swept left to right and every *occluded* pixel gets
//!    the mean of the `n` nearest usable columns to its left. The occluder of a
//!    left-camera occlusion sits further right, so the left side carries the
//!    background surface the pixel belongs to.
//!
//! Visible pixels are never modified, and rows without any visible pixel are
//! passed through unchanged.

use rayon::prelude::*;

use crate::error::{ensure_same_shape, Error, Result};
use crate::geometry::{Label, OcclusionMask};
use crate::imgio::DisparityMap;

pub const DEFAULT_NEIGHBORS: usize = 10;

pub fn goapp(disp: &DisparityMap, mask: &OcclusionMask, n: usize) -> Result<DisparityMap> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "GOAPP needs n >= 1 neighbours".into(),
        ));
    }
    ensure_same_shape(disp.dims(), mask.dims())?;
    let mut out = disp.clone();
    let w = disp.width();
    if w == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| fill_row(row, mask.row(y), n));
    Ok(out)
}

fn fill_row(row: &mut [f64], labels: &[Label], n: usize) {
    if !labels.contains(&Label::Visible) {
        return;
    }
    let mut usable: Vec<bool> = labels.iter().map(|l| *l == Label::Visible).collect();

    let lead = labels
        .iter()
        .take_while(|l| matches!(l, Label::Occluded | Label::Exclusive))
        .count();
    for j in (0..lead).rev() {
        let (sum, count) = ((j + 1)..row.len())
            .filter(|&c| usable[c])
            .take(n)
            .fold((0.0, 0usize), |(s, c), col| (s + row[col], c + 1));
        // A visible column exists to the right of the leading run, so count > 0.
        row[j] = sum / count as f64;
        usable[j] = true;
    }

    for j in lead..row.len() {
        if labels[j] != Label::Occluded {
            continue;
        }
        let (sum, count) = (0..j)
            .rev()
            .filter(|&c| usable[c])
            .take(n)
            .fold((0.0, 0usize), |(s, c), col| (s + row[col], c + 1));
        if count > 0 {
            row[j] = sum / count as f64;
            usable[j] = true;
        }
    }
}
