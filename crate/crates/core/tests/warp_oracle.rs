mod common;

use occlusion_core::warp::{bilinear_sample, reconstruct_left, reconstruction_error_map};
use occlusion_core::DisparityMap;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #[test]
    fn bilinear_matches_four_neighbour_oracle(
        seed in any::<u64>(), w in 1usize..12, h in 1usize..8,
        fx in -2.0f64..14.0, fy in -2.0f64..10.0,
    ) {
        let mut rng = common::rng(seed);
        let img = common::random_image(&mut rng, w, h);
        let got = bilinear_sample(&img, fx, fy);
        prop_assert!((got - common::bilinear_oracle(&img, fx, fy)).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_oracle_rowwise(seed in any::<u64>(), w in 2usize..20, h in 1usize..5) {
        let mut rng = common::rng(seed);
        let right = common::random_image(&mut rng, w, h);
        let disp = common::random_disparity(&mut rng, w, h, 8.0);
        let r = reconstruct_left(&right, &disp).unwrap();
        for y in 0..h {
            for x in 0..w {
                let xs = x as f64 - disp.get(x, y);
                let want = common::bilinear_oracle(&right, xs, y as f64);
                prop_assert!((r.image.get(x, y) - want).abs() < 1e-12);
                prop_assert_eq!(r.in_bounds[y * w + x], xs >= 0.0 && xs <= (w - 1) as f64);
            }
        }
    }

    #[test]
    fn disparity_derivative_matches_finite_difference(seed in any::<u64>(), w in 3usize..20) {
        let mut rng = common::rng(seed);
        let right = common::random_image(&mut rng, w, 2);
        let disp = DisparityMap::from_fn(w, 2, |_, _| rng.gen_range(0.0..(w - 1) as f64));
        let r = reconstruct_left(&right, &disp).unwrap();
        let h = 1e-6;
        for y in 0..2 {
            for x in 0..w {
                let xs = x as f64 - disp.get(x, y);
                if (xs - xs.round()).abs() < 1e-4 || xs < 0.0 {
                    continue;
                }
                let fd = (bilinear_sample(&right, xs - h, y as f64)
                    - bilinear_sample(&right, xs + h, y as f64)) / (2.0 * h);
                prop_assert!((r.ddisp.get(x, y) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn reconstruction_is_lipschitz_in_disparity(seed in any::<u64>(), w in 2usize..20, h in 1usize..4) {
        let mut rng = common::rng(seed);
        let right = common::random_image(&mut rng, w, h);
        let d1 = common::random_disparity(&mut rng, w, h, 8.0);
        let d2 = common::random_disparity(&mut rng, w, h, 8.0);
        let a = reconstruct_left(&right, &d1).unwrap();
        let b = reconstruct_left(&right, &d2).unwrap();
        let lip = (0..h)
            .flat_map(|y| right.row(y).windows(2).map(|p| (p[1] - p[0]).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        let dmax = d1.data().iter().zip(d2.data()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let rmax = a.image.data().iter().zip(b.image.data()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(rmax <= lip * dmax + 1e-12);
    }
}

#[test]
fn zero_disparity_reproduces_right_image() {
    let mut rng = common::rng(3);
    let right = common::random_image(&mut rng, 9, 4);
    let r = reconstruct_left(&right, &DisparityMap::constant(9, 4, 0.0)).unwrap();
    assert_eq!(r.image, right);
    let e = reconstruction_error_map(&right, &r.image).unwrap();
    assert!(e.data.iter().all(|v| *v == 0.0));
}

#[test]
fn integer_shift_is_exact_translation() {
    let mut rng = common::rng(5);
    let right = common::random_image(&mut rng, 16, 3);
    let r = reconstruct_left(&right, &DisparityMap::constant(16, 3, 3.0)).unwrap();
    for y in 0..3 {
        for x in 3..16 {
            assert_eq!(r.image.get(x, y), right.get(x - 3, y));
        }
    }
}
