//! Disparity and depth evaluation: the standard monocular/stereo depth error set
//! plus KITTI D1-all and end-point error.

use std::fmt;

use crate::error::{ensure_same_shape, Error, Result};
use crate::geometry::{Label, OcclusionMask};
use crate::imgio::{CameraCalib, DisparityMap};

/// KITTI outlier thresholds: absolute (px) and relative to the ground truth.
pub const D1_ABS_THRESHOLD: f64 = 3.0;
pub const D1_REL_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionClass {
    /// Visible pixels only.
    Visible,
    /// Occluded and left-exclusive pixels.
    Occluded,
}

impl RegionClass {
    fn contains(self, label: Label) -> bool {
        match self {
            RegionClass::Visible => label == Label::Visible,
            RegionClass::Occluded => matches!(label, Label::Occluded | Label::Exclusive),
        }
    }
}

/// Restricts evaluation to one class of a mask.
#[derive(Clone, Copy, Debug)]
pub struct Region<'a> {
    pub mask: &'a OcclusionMask,
    pub class: RegionClass,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    /// Meters.
    pub rmse: f64,
    pub rmse_log: f64,
    pub d1_all: f64,
    /// Pixels.
    pub epe: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_valid: usize,
}

/// True when a disparity error counts as a KITTI outlier (> 3 px and > 5 %).
#[inline]
pub fn is_d1_outlier(pred: f64, gt: f64) -> bool {
    let err = (pred - gt).abs();
    err > D1_ABS_THRESHOLD && err > D1_REL_THRESHOLD * gt
}

/// Evaluates `pred` against `gt` over pixels with a valid, positive ground truth.
///
/// Predicted depths are capped at `cap` meters (pass `f64::INFINITY` to disable);
/// ground-truth depths are not. A missing or non-positive prediction counts as
/// disparity 0, i.e. depth at the cap.
pub fn evaluate(
    pred: &DisparityMap,
    gt: &DisparityMap,
    calib: &CameraCalib,
    cap: f64,
    region: Option<Region<'_>>,
) -> Result<EvalReport> {
    ensure_same_shape(pred.dims(), gt.dims())?;
    if let Some(r) = &region {
        ensure_same_shape(pred.dims(), r.mask.dims())?;
    }
    let fb = calib.focal() * calib.baseline();

    let mut n = 0usize;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let (mut outliers, mut epe) = (0usize, 0.0);
    let mut deltas = [0usize; 3];
    for i in 0..gt.data().len() {
        let g = gt.data()[i];
        if !gt.valid()[i] || g <= 0.0 {
            continue;
        }
        if let Some(r) = &region {
            if !r.class.contains(r.mask.labels()[i]) {
                continue;
            }
        }
        let p = if pred.valid()[i] && pred.data()[i] > 0.0 {
            pred.data()[i]
        } else {
            0.0
        };
        n += 1;
        epe += (p - g).abs();
        if is_d1_outlier(p, g) {
            outliers += 1;
        }

        let depth_gt = fb / g;
        let depth_pred = if p > 0.0 { (fb / p).min(cap) } else { cap };
        let diff = depth_pred - depth_gt;
        abs_rel += diff.abs() / depth_gt;
        sq_rel += diff * diff / depth_gt;
        sq += diff * diff;
        let log_diff = depth_pred.ln() - depth_gt.ln();
        sq_log += log_diff * log_diff;
        let ratio = (depth_pred / depth_gt).max(depth_gt / depth_pred);
        for (k, count) in deltas.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *count += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    let nf = n as f64;
    Ok(EvalReport {
        abs_rel: abs_rel / nf,
        sq_rel: sq_rel / nf,
        rmse: (sq / nf).sqrt(),
        rmse_log: (sq_log / nf).sqrt(),
        d1_all: outliers as f64 / nf,
        epe: epe / nf,
        delta1: deltas[0] as f64 / nf,
        delta2: deltas[1] as f64 / nf,
        delta3: deltas[2] as f64 / nf,
        n_valid: n,
    })
}

impl EvalReport {
    fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("abs_rel", self.abs_rel),
            ("sq_rel", self.sq_rel),
            ("rmse", self.rmse),
            ("rmse_log", self.rmse_log),
            ("d1_all", self.d1_all),
            ("epe", self.epe),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta3", self.delta3),
        ]
    }

    /// One `key=value` line per metric.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("n_valid={}\n", self.n_valid));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries = self.entries();
        for (k, _) in &entries {
            write!(f, "{k:>10}")?;
        }
        writeln!(f)?;
        for (_, v) in &entries {
            write!(f, "{v:>10.4}")?;
        }
        writeln!(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: f64, g: f64) -> EvalReport {
        let pred = DisparityMap::new(1, 1, vec![p]).unwrap();
        let gt = DisparityMap::new(1, 1, vec![g]).unwrap();
        evaluate(&pred, &gt, &CameraCalib::kitti(), 80.0, None).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = DisparityMap::from_fn(4, 3, |x, y| 5.0 + x as f64 + 2.0 * y as f64);
        let r = evaluate(&gt, &gt, &CameraCalib::kitti(), 80.0, None).unwrap();
        assert_eq!(
            (r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.d1_all, r.epe),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!((r.delta1, r.delta2, r.delta3), (1.0, 1.0, 1.0));
        assert_eq!(r.n_valid, 12);
    }

    #[test]
    fn d1_rule_examples() {
        let r = single(96.0, 100.0);
        assert_eq!(r.d1_all, 0.0);
        assert_eq!(r.epe, 4.0);
        assert_eq!(single(14.0, 10.0).d1_all, 1.0);
    }

    #[test]
    fn invalid_gt_excluded() {
        let pred = DisparityMap::new(2, 1, vec![10.0, 50.0]).unwrap();
        let gt = DisparityMap::with_validity(2, 1, vec![10.0, 1.0], vec![true, false]).unwrap();
        let r = evaluate(&pred, &gt, &CameraCalib::kitti(), 80.0, None).unwrap();
        assert_eq!(r.n_valid, 1);
        assert_eq!(r.epe, 0.0);
    }

    #[test]
    fn empty_region_is_error() {
        let d = DisparityMap::new(1, 1, vec![3.0]).unwrap();
        let mask = OcclusionMask::all_visible(1, 1);
        let region = Region {
            mask: &mask,
            class: RegionClass::Occluded,
        };
        assert!(matches!(
            evaluate(&d, &d, &CameraCalib::kitti(), 80.0, Some(region)),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn report_formats() {
        let r = single(10.0, 10.0);
        assert!(r.key_values().contains("d1_all=0\n"));
        assert_eq!(r.to_string().lines().count(), 2);
    }
}
