mod common;

use occlusion_core::geometry::occlusion_mask;
use occlusion_core::goapp::goapp;
use occlusion_core::goat::{goat_optimize, GoatConfig};
use occlusion_core::{DisparityMap, Label, OcclusionMask};
use proptest::prelude::*;
use rand::Rng;

fn arb_case() -> impl Strategy<Value = (DisparityMap, OcclusionMask, usize)> {
    (1usize..30, 1usize..5, any::<u64>(), 1usize..12).prop_map(|(w, h, seed, n)| {
        let mut rng = common::rng(seed);
        let d = common::random_disparity(&mut rng, w, h, 16.0);
        let mut m = occlusion_mask(&d, 1.0);
        for y in 0..h {
            for x in 0..w {
                if rng.gen_bool(0.1) {
                    m.set(x, y, Label::Occluded);
                }
            }
        }
        (d, m, n)
    })
}

proptest! {
    #[test]
    fn visible_pixels_are_untouched((d, m, n) in arb_case()) {
        let out = goapp(&d, &m, n).unwrap();
        for (i, l) in m.labels().iter().enumerate() {
            if *l == Label::Visible {
                prop_assert_eq!(out.data()[i], d.data()[i]);
            }
        }
    }

    #[test]
    fn filled_values_stay_within_row_visible_range((d, m, n) in arb_case()) {
        let out = goapp(&d, &m, n).unwrap();
        for y in 0..d.height() {
            let vis: Vec<f64> = (0..d.width())
                .filter(|&x| m.get(x, y) == Label::Visible)
                .map(|x| d.get(x, y))
                .collect();
            if vis.is_empty() {
                prop_assert_eq!(out.row_values(y), d.row_values(y));
                continue;
            }
            let lo = vis.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for x in 0..d.width() {
                if out.get(x, y) != d.get(x, y) {
                    prop_assert!(out.get(x, y) >= lo - 1e-12 && out.get(x, y) <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn second_pass_with_filled_pixels_visible_is_identity((d, m, n) in arb_case()) {
        let once = goapp(&d, &m, n).unwrap();
        let mut relabelled = m.clone();
        for y in 0..d.height() {
            for x in 0..d.width() {
                if once.get(x, y) != d.get(x, y) || m.get(x, y) == Label::Visible {
                    relabelled.set(x, y, Label::Visible);
                }
            }
        }
        let twice = goapp(&once, &relabelled, n).unwrap();
        for y in 0..d.height() {
            for x in 0..d.width() {
                if relabelled.get(x, y) == Label::Visible {
                    prop_assert_eq!(twice.get(x, y), once.get(x, y));
                }
            }
        }
    }
}

trait RowValues {
    fn row_values(&self, y: usize) -> Vec<f64>;
}

impl RowValues for DisparityMap {
    fn row_values(&self, y: usize) -> Vec<f64> {
        (0..self.width()).map(|x| self.get(x, y)).collect()
    }
}

#[test]
fn occluded_band_takes_background_value() {
    let scene = common::two_plane_scene(2, 64, 40);
    let mut corrupted = scene.gt_disp.clone();
    for (i, l) in scene.gt_mask.labels().iter().enumerate() {
        if *l == Label::Occluded {
            corrupted.set(i % 64, i / 64, 15.0);
        }
    }
    let out = goapp(&corrupted, &scene.gt_mask, 10).unwrap();
    assert!(common::occluded_epe(&out, &scene) < 1e-12);
}

#[test]
fn goat_output_postprocessing_keeps_visible_set() {
    let scene = common::two_plane_scene(1, 48, 24);
    let cfg = GoatConfig {
        epochs: 3,
        steps_per_epoch: 5,
        ..GoatConfig::desk_scale()
    };
    let out = goat_optimize(&scene.left, &scene.right, &cfg, None).unwrap();
    let filled = goapp(&out.disparity, &out.mask, 10).unwrap();
    for (i, l) in out.mask.labels().iter().enumerate() {
        if *l == Label::Visible {
            assert_eq!(filled.data()[i], out.disparity.data()[i]);
        }
    }
}
