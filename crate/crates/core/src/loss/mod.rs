//! Occlusion-masked photometric objective and its gradient with respect to disparity.
//!
//! Per pixel:
//!
//! ```text
//! C^r  = alpha * (1 - SSIM(I, I~)) / 2 + (1 - alpha) * |I - I~|
//! C^ar = ASW-weighted window mean of C^r
//! C^s  = |dx d| exp(-|dx I|) + |dy d| exp(-|dy I|)
//! C    = w1 * C^ar + w2 * C^s
//! ```
//!
//! The reconstruction part of the image loss is the mean of `w1 * C^ar` over pixels
//! whose mask value is 1. The smoothness part is averaged over every pixel by
//! default, or over the unmasked pixels when [`LossParams::mask_smoothness`] is
//! set.

mod asw;
mod ssim;

pub use asw::{asw_aggregate, AswKernel};
pub use ssim::{ssim_map, SSIM_C1, SSIM_C2};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::geometry::OcclusionMask;
use crate::imgio::{DisparityMap, Field, IntensityImage};
use crate::warp::reconstruct_left;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    /// SSIM share of the reconstruction cost.
    pub alpha: f64,
    /// Weight of the aggregated reconstruction cost.
    pub w1: f64,
    /// Weight of the smoothness cost.
    pub w2: f64,
    /// ASW half-window; the window is `2k x 2k`.
    pub k: usize,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
    /// Apply the occlusion mask to the smoothness term as well. When false the
    /// smoothness term is averaged over every pixel.
    pub mask_smoothness: bool,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            alpha: 0.8,
            w1: 0.85,
            w2: 0.15,
            k: 16,
            ssim_c1: SSIM_C1,
            ssim_c2: SSIM_C2,
            mask_smoothness: false,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} not in [0, 1]",
                self.alpha
            )));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(Error::InvalidArgument("loss weights must be >= 0".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument(
                "ASW half-window k must be >= 1".into(),
            ));
        }
        if !(self.ssim_c1 > 0.0 && self.ssim_c2 > 0.0) {
            return Err(Error::InvalidArgument("SSIM constants must be > 0".into()));
        }
        Ok(())
    }
}

/// Cost maps, masked total and its gradient for one disparity field.
#[derive(Clone, Debug, PartialEq)]
pub struct LossField {
    pub cr: Field,
    pub car: Field,
    pub cs: Field,
    pub total: f64,
    /// `d total / d disparity` per pixel.
    pub grad: Field,
    /// Number of pixels with mask value 1.
    pub active: usize,
}

/// `alpha * (1 - ssim) / 2 + (1 - alpha) * |I - I~|`, from precomputed SSIM.
#[inline]
pub fn reconstruction_cost(alpha: f64, ssim: f64, abs_diff: f64) -> f64 {
    alpha * (1.0 - ssim) / 2.0 + (1.0 - alpha) * abs_diff
}

pub fn photometric_cost(
    left: &IntensityImage,
    recon: &IntensityImage,
    params: &LossParams,
) -> Result<Field> {
    ensure_same_shape(left.dims(), recon.dims())?;
    let s = ssim::ssim_map_with(left, recon, params.ssim_c1, params.ssim_c2);
    Ok(photometric_from_ssim(left, recon, &s, params.alpha))
}

fn photometric_from_ssim(
    left: &IntensityImage,
    recon: &IntensityImage,
    ssim: &Field,
    alpha: f64,
) -> Field {
    Field {
        width: left.width(),
        height: left.height(),
        data: left
            .data()
            .iter()
            .zip(recon.data())
            .zip(&ssim.data)
            .map(|((a, b), s)| reconstruction_cost(alpha, *s, (a - b).abs()))
            .collect(),
    }
}

/// Edge-aware weights `exp(-|dx I|)` and `exp(-|dy I|)` from forward
/// differences; 0 on the last column / row where no forward difference exists.
fn edge_weights(left: &IntensityImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = left.dims();
    let mut ax = vec![0.0; w * h];
    let mut ay = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                ax[i] = (-(left.get(x + 1, y) - left.get(x, y)).abs()).exp();
            }
            if y + 1 < h {
                ay[i] = (-(left.get(x, y + 1) - left.get(x, y)).abs()).exp();
            }
        }
    }
    (ax, ay)
}

fn smoothness_with(disp: &DisparityMap, ax: &[f64], ay: &[f64]) -> Field {
    let (w, h) = disp.dims();
    Field::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let d = disp.get(x, y);
        let mut c = 0.0;
        if x + 1 < w {
            c += (disp.get(x + 1, y) - d).abs() * ax[i];
        }
        if y + 1 < h {
            c += (disp.get(x, y + 1) - d).abs() * ay[i];
        }
        c
    })
}

/// Edge-aware first-order smoothness of the disparity field.
pub fn smoothness_cost(disp: &DisparityMap, left: &IntensityImage) -> Result<Field> {
    ensure_same_shape(disp.dims(), left.dims())?;
    let (ax, ay) = edge_weights(left);
    Ok(smoothness_with(disp, &ax, &ay))
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Precomputed left-image quantities for repeated loss evaluations on one pair.
#[derive(Clone, Debug)]
pub struct Objective {
    left: IntensityImage,
    right: IntensityImage,
    params: LossParams,
    asw: AswKernel,
    ax: Vec<f64>,
    ay: Vec<f64>,
}

impl Objective {
    pub fn new(left: &IntensityImage, right: &IntensityImage, params: LossParams) -> Result<Self> {
        ensure_same_shape(left.dims(), right.dims())?;
        params.validate()?;
        let (ax, ay) = edge_weights(left);
        Ok(Objective {
            left: left.clone(),
            right: right.clone(),
            params,
            asw: AswKernel::new(left, params.k)?,
            ax,
            ay,
        })
    }

    pub fn params(&self) -> &LossParams {
        &self.params
    }

    /// Masked loss and its analytic gradient.
    ///
    /// Masked-out pixels contribute no cost of their own, but their disparity still
    /// receives gradient through the ASW windows and smoothness stencils of
    /// unmasked neighbours.
    pub fn evaluate(&self, disp: &DisparityMap, mask: &OcclusionMask) -> Result<LossField> {
        ensure_same_shape(disp.dims(), self.left.dims())?;
        ensure_same_shape(mask.dims(), self.left.dims())?;
        let (w, h) = disp.dims();
        let n = w * h;
        let p = &self.params;

        let m = mask.binary();
        let active = m.iter().filter(|v| **v > 0.0).count();
        if active == 0 {
            return Err(Error::DegenerateMask);
        }
        let inv = 1.0 / active as f64;

        let recon = reconstruct_left(&self.right, disp)?;
        let s = ssim::ssim_map_with(&self.left, &recon.image, p.ssim_c1, p.ssim_c2);
        let cr = photometric_from_ssim(&self.left, &recon.image, &s, p.alpha);
        let car = self.asw.aggregate(&cr.data);
        let cs = smoothness_with(disp, &self.ax, &self.ay);

        // Per-pixel weight of the smoothness term in the total.
        let smooth_w: Vec<f64> = if p.mask_smoothness {
            m.iter().map(|mi| mi * inv).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let total = (0..n)
            .filter(|&i| m[i] > 0.0)
            .map(|i| p.w1 * car[i])
            .sum::<f64>()
            * inv
            + p.w2 * (0..n).map(|i| smooth_w[i] * cs.data[i]).sum::<f64>();

        // d total / d C^r
        let up_car: Vec<f64> = m.iter().map(|mi| p.w1 * mi * inv).collect();
        let g_cr = self.asw.backward(&up_car);

        // d total / d I~ through the SSIM and L1 parts of C^r.
        let up_ssim: Vec<f64> = g_cr.iter().map(|g| -p.alpha / 2.0 * g).collect();
        let mut g_recon =
            ssim::ssim_backward_b(&self.left, &recon.image, &up_ssim, p.ssim_c1, p.ssim_c2);
        for i in 0..n {
            let diff = recon.image.data()[i] - self.left.data()[i];
            g_recon[i] += g_cr[i] * (1.0 - p.alpha) * sign(diff);
        }

        let mut grad: Vec<f64> = g_recon
            .iter()
            .zip(&recon.ddisp.data)
            .map(|(g, dd)| g * dd)
            .collect();

        if p.w2 != 0.0 {
            let d = disp.data();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let scale = p.w2 * smooth_w[i];
                    if scale == 0.0 {
                        continue;
                    }
                    if x + 1 < w {
                        let g = scale * self.ax[i] * sign(d[i + 1] - d[i]);
                        grad[i + 1] += g;
                        grad[i] -= g;
                    }
                    if y + 1 < h {
                        let g = scale * self.ay[i] * sign(d[i + w] - d[i]);
                        grad[i + w] += g;
                        grad[i] -= g;
                    }
                }
            }
        }

        Ok(LossField {
            cr,
            car: Field {
                width: w,
                height: h,
                data: car,
            },
            cs,
            total,
            grad: Field {
                width: w,
                height: h,
                data: grad,
            },
            active,
        })
    }
}

/// One-shot evaluation of the masked loss and gradient.
pub fn total_loss(
    disp: &DisparityMap,
    left: &IntensityImage,
    right: &IntensityImage,
    mask: &OcclusionMask,
    params: &LossParams,
) -> Result<LossField> {
    Objective::new(left, right, *params)?.evaluate(disp, mask)
}
