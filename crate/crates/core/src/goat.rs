//! Per-image occlusion-aware optimization of a dense disparity field.
//!
//! The disparity of every pixel is a free parameter, descended on the masked
//! photometric objective of [`crate::loss`]. The first epoch trains on every
//! pixel; before each later epoch the occlusion mask is recomputed from the
//! current disparity and held fixed for that epoch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::geometry::{occlusion_mask, Label, OcclusionMask};
use crate::imgio::{DisparityMap, IntensityImage};
use crate::loss::{LossParams, Objective};

/// Collision tolerance for masks refreshed during optimization. Descent leaves
/// sub-pixel jitter that a full-pixel tolerance would read as occlusion.
pub const DEFAULT_GOAT_BIN_TOLERANCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    Constant {
        value: f64,
    },
    /// Winner-take-all SAD over integer disparities `0..=max_disparity`.
    BlockMatch {
        patch: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoatConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Step size in pixels per unit gradient of the masked cost sum.
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub loss: LossParams,
    pub bin_tolerance: f64,
    /// Disparities are clamped to `[0, max_disparity]` after every step.
    pub max_disparity: f64,
    pub init: InitStrategy,
    /// When false the mask stays all-visible for every epoch.
    pub mask_updates: bool,
    /// Recompute the mask every this many epochs (after the first).
    pub mask_update_every: usize,
    /// Keep a disparity / mask snapshot at the end of every epoch.
    pub keep_snapshots: bool,
}

impl Default for GoatConfig {
    fn default() -> Self {
        GoatConfig {
            epochs: 20,
            steps_per_epoch: 60,
            learning_rate: 0.15,
            lr_decay: 0.93,
            loss: LossParams::default(),
            bin_tolerance: DEFAULT_GOAT_BIN_TOLERANCE,
            max_disparity: 32.0,
            init: InitStrategy::BlockMatch { patch: 5 },
            mask_updates: true,
            mask_update_every: 1,
            keep_snapshots: false,
        }
    }
}

impl GoatConfig {
    /// Settings for small synthetic pairs: a narrow ASW window and a stronger
    /// smoothness weight than the full-resolution defaults.
    pub fn desk_scale() -> Self {
        GoatConfig {
            loss: LossParams {
                k: 4,
                w2: 1.0,
                ..LossParams::default()
            },
            max_disparity: 16.0,
            init: InitStrategy::BlockMatch { patch: 5 },
            ..GoatConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument("lr_decay must be in (0, 1]".into()));
        }
        if !(self.max_disparity >= 0.0 && self.max_disparity.is_finite()) {
            return Err(Error::InvalidArgument(
                "max_disparity must be finite and >= 0".into(),
            ));
        }
        if self.mask_update_every < 1 {
            return Err(Error::InvalidArgument(
                "mask_update_every must be >= 1".into(),
            ));
        }
        if let InitStrategy::BlockMatch { patch } = self.init {
            if patch < 1 {
                return Err(Error::InvalidArgument(
                    "block-match patch must be >= 1".into(),
                ));
            }
        }
        self.loss.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss with this epoch's mask before the first step.
    pub loss_start: f64,
    /// Loss with the same mask after the last step.
    pub loss_end: f64,
    /// Fraction of pixels excluded from the loss this epoch.
    pub masked_fraction: f64,
    pub epe: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoatTrace {
    pub epochs: Vec<EpochRecord>,
    /// End-of-epoch disparity and mask, when snapshots are enabled.
    pub snapshots: Vec<(DisparityMap, OcclusionMask)>,
}

impl GoatTrace {
    /// Whitespace-separated table, one row per epoch; EPE is `nan` without ground truth.
    pub fn to_table(&self) -> String {
        let mut out = String::from("epoch loss_start loss_end masked_fraction epe\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{} {:.9} {:.9} {:.6} {:.6}\n",
                r.epoch,
                r.loss_start,
                r.loss_end,
                r.masked_fraction,
                r.epe.unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoatOutput {
    pub disparity: DisparityMap,
    /// Occlusion mask of the returned disparity.
    pub mask: OcclusionMask,
    pub trace: GoatTrace,
}

/// Initial disparity field for the optimization.
pub fn init_disparity(
    left: &IntensityImage,
    right: &IntensityImage,
    config: &GoatConfig,
) -> Result<DisparityMap> {
    ensure_same_shape(left.dims(), right.dims())?;
    let (w, h) = left.dims();
    match config.init {
        InitStrategy::Constant { value } => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "constant init {value} must be finite and >= 0"
                )));
            }
            Ok(DisparityMap::constant(w, h, value))
        }
        InitStrategy::BlockMatch { patch } => {
            let max_disp = config.max_disparity.floor() as usize;
            if max_disp >= w {
                return Err(Error::InvalidArgument(format!(
                    "max disparity {max_disp} must be smaller than the image width {w}"
                )));
            }
            block_match(left, right, max_disp, patch)
        }
    }
}

/// Winner-take-all SAD block matching. Patch samples are clamped to the image,
/// candidates with `u - d < 0` are skipped, and ties go to the lowest disparity.
pub fn block_match(
    left: &IntensityImage,
    right: &IntensityImage,
    max_disp: usize,
    patch: usize,
) -> Result<DisparityMap> {
    ensure_same_shape(left.dims(), right.dims())?;
    if patch < 1 {
        return Err(Error::InvalidArgument("patch must be >= 1".into()));
    }
    let (w, h) = left.dims();
    if w > 0 && max_disp >= w {
        return Err(Error::InvalidArgument(format!(
            "max disparity {max_disp} must be smaller than the image width {w}"
        )));
    }
    let lo = (patch as isize - 1) / 2;
    let hi = patch as isize / 2;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut data = vec![0.0; w * h];
    if w > 0 {
        data.par_chunks_mut(w).enumerate().for_each(|(y, out)| {
            for (u, slot) in out.iter_mut().enumerate() {
                let mut best = (f64::INFINITY, 0usize);
                for d in 0..=max_disp.min(u) {
                    let mut sad = 0.0;
                    for dy in -lo..=hi {
                        let yy = clamp(y as isize + dy, h);
                        for dx in -lo..=hi {
                            let xl = clamp(u as isize + dx, w);
                            let xr = clamp(u as isize - d as isize + dx, w);
                            sad += (left.get(xl, yy) - right.get(xr, yy)).abs();
                        }
                    }
                    if sad < best.0 {
                        best = (sad, d);
                    }
                }
                *slot = best.1 as f64;
            }
        });
    }
    DisparityMap::new(w, h, data)
}

fn mean_abs_error(d: &DisparityMap, gt: &DisparityMap) -> f64 {
    let (sum, n) = d
        .data()
        .iter()
        .zip(gt.data())
        .zip(gt.valid())
        .filter(|(_, ok)| **ok)
        .fold((0.0, 0usize), |(s, n), ((p, g), _)| {
            (s + (p - g).abs(), n + 1)
        });
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs the epoch schedule and returns the final disparity, its occlusion mask
/// and the per-epoch trace.
pub fn goat_optimize(
    left: &IntensityImage,
    right: &IntensityImage,
    config: &GoatConfig,
    gt: Option<&DisparityMap>,
) -> Result<GoatOutput> {
    config.validate()?;
    ensure_same_shape(left.dims(), right.dims())?;
    if let Some(g) = gt {
        ensure_same_shape(left.dims(), g.dims())?;
    }
    let (w, h) = left.dims();
    let objective = Objective::new(left, right, config.loss)?;
    let mut disp = init_disparity(left, right, config)?;
    let mut mask = OcclusionMask::all_visible(w, h);
    let mut trace = GoatTrace::default();
    let mut lr = config.learning_rate;

    for epoch in 1..=config.epochs {
        if epoch > 1 && config.mask_updates && (epoch - 1) % config.mask_update_every == 0 {
            mask = occlusion_mask(&disp, config.bin_tolerance);
            if mask.count(Label::Visible) == 0 {
                mask = OcclusionMask::all_visible(w, h);
            }
        }

        let mut loss_start = f64::NAN;
        let mut loss_end = f64::NAN;
        for step in 0..=config.steps_per_epoch {
            let lf = objective.evaluate(&disp, &mask)?;
            if !lf.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    trace: Box::new(trace),
                });
            }
            if step == 0 {
                loss_start = lf.total;
            }
            loss_end = lf.total;
            if step == config.steps_per_epoch {
                break;
            }
            let scale = lr * lf.active as f64;
            for (d, g) in disp.data_mut().iter_mut().zip(&lf.grad.data) {
                *d = (*d - scale * g).clamp(0.0, config.max_disparity);
            }
        }

        trace.epochs.push(EpochRecord {
            epoch,
            loss_start,
            loss_end,
            masked_fraction: mask.masked_fraction(),
            epe: gt.map(|g| mean_abs_error(&disp, g)),
        });
        if config.keep_snapshots {
            trace.snapshots.push((disp.clone(), mask.clone()));
        }
        lr *= config.lr_decay;
    }

    // Steps only move valid pixels; keep the validity flags consistent anyway.
    let disp = DisparityMap::new(w, h, disp.data().to_vec())?;
    let mask = occlusion_mask(&disp, config.bin_tolerance);
    Ok(GoatOutput {
        disparity: disp,
        mask,
        trace,
    })
}
