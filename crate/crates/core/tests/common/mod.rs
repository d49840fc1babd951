//! Test-only oracles, written independently of the library code paths they check.
#![allow(dead_code)]

use occlusion_core::{DisparityMap, IntensityImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> IntensityImage {
    IntensityImage::from_fn(w, h, |_, _| rng.gen_range(0.0..1.0))
}

/// Disparity map mixing integer plateaus and sub-pixel ramps in `[0, max]`.
pub fn random_disparity(rng: &mut impl Rng, w: usize, h: usize, max: f64) -> DisparityMap {
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..h {
        let mut x = 0;
        while x < w {
            let run = rng.gen_range(1..=w.clamp(1, 12));
            let start: f64 = rng.gen_range(0.0..=max);
            let kind = rng.gen_range(0..3);
            let slope: f64 = rng.gen_range(-1.5..1.5);
            for i in 0..run.min(w - x) {
                let v = match kind {
                    0 => start.round(),
                    1 => start + slope * i as f64,
                    _ => rng.gen_range(0.0..=max),
                };
                data.push(v.clamp(0.0, max));
            }
            x += run;
        }
    }
    DisparityMap::new(w, h, data).unwrap()
}

/// Four-neighbour weighted sum, evaluated directly from the definition.
pub fn bilinear_oracle(img: &IntensityImage, x: f64, y: f64) -> f64 {
    let (w, h) = img.dims();
    let x = x.max(0.0).min((w - 1) as f64);
    let y = y.max(0.0).min((h - 1) as f64);
    let mut acc = 0.0;
    for yy in 0..h {
        for xx in 0..w {
            let wx = (1.0 - (x - xx as f64).abs()).max(0.0);
            let wy = (1.0 - (y - yy as f64).abs()).max(0.0);
            acc += wx * wy * img.get(xx, yy);
        }
    }
    acc
}

/// Two-pass SSIM of the 3x3 window around `(x, y)` with mirrored borders.
pub fn ssim_window_oracle(a: &IntensityImage, b: &IntensityImage, x: usize, y: usize) -> f64 {
    let (w, h) = a.dims();
    let mirror = |i: i64, n: usize| -> usize {
        let n = n as i64;
        if n == 1 {
            return 0;
        }
        let mut i = i.abs();
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        i as usize
    };
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for dy in -1..=1i64 {
        for dx in -1..=1i64 {
            let xx = mirror(x as i64 + dx, w);
            let yy = mirror(y as i64 + dy, h);
            va.push(a.get(xx, yy));
            vb.push(b.get(xx, yy));
        }
    }
    let n = 9.0;
    let ma = va.iter().sum::<f64>() / n;
    let mb = vb.iter().sum::<f64>() / n;
    let sa = va.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
    let sb = vb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
    let sab = va
        .iter()
        .zip(&vb)
        .map(|(p, q)| (p - ma) * (q - mb))
        .sum::<f64>()
        / n;
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    ((2.0 * ma * mb + c1) * (2.0 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2))
}

/// Direct double loop over the `2k x 2k` window `[i - k, i + k - 1]`.
pub fn asw_oracle(cost: &[f64], guide: &IntensityImage, k: usize) -> Vec<f64> {
    let (w, h) = guide.dims();
    let k = k as i64;
    let mut out = vec![0.0; w * h];
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let centre = guide.get(i as usize, j as usize);
            let (mut num, mut den) = (0.0, 0.0);
            for y in (j - k)..(j + k) {
                for x in (i - k)..(i + k) {
                    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                        continue;
                    }
                    let wt = (-(centre - guide.get(x as usize, y as usize)).abs() / 2.0).exp();
                    num += wt * cost[y as usize * w + x as usize];
                    den += wt;
                }
            }
            out[j as usize * w + i as usize] = num / den;
        }
    }
    out
}

/// Standard normal sample (Box-Muller).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

use occlusion_core::loss::Objective;
use occlusion_core::warp::reconstruct_left;
use occlusion_core::OcclusionMask;

/// Central-difference check of the analytic gradient at pixels that sit away from
/// every non-differentiable point. Returns `(analytic, numeric)` pairs.
pub fn gradient_pairs(
    obj: &Objective,
    left: &IntensityImage,
    right: &IntensityImage,
    disp: &DisparityMap,
    mask: &OcclusionMask,
    pixels: &[(usize, usize)],
    h: f64,
) -> Vec<(f64, f64)> {
    let (w, ht) = disp.dims();
    let base = obj.evaluate(disp, mask).unwrap();
    let recon = reconstruct_left(right, disp).unwrap();
    let margin = 1e-2;
    let mut out = Vec::new();
    for &(x, y) in pixels {
        let d = disp.get(x, y);
        let xs = x as f64 - d;
        if (xs - xs.round()).abs() < margin {
            continue;
        }
        if (recon.image.get(x, y) - left.get(x, y)).abs() < margin {
            continue;
        }
        let near_kink = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
            .iter()
            .any(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < ht
                    && (disp.get(nx as usize, ny as usize) - d).abs() < margin
            });
        if near_kink || d - h < 0.0 {
            continue;
        }
        let mut plus = disp.clone();
        plus.set(x, y, d + h);
        let mut minus = disp.clone();
        minus.set(x, y, d - h);
        let fp = obj.evaluate(&plus, mask).unwrap().total;
        let fm = obj.evaluate(&minus, mask).unwrap().total;
        out.push((base.grad.get(x, y), (fp - fm) / (2.0 * h)));
    }
    out
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs()) + 1e-8)
}

use occlusion_core::synth::{render, Layer, Rect, RenderedScene, SceneSpec, Texture};
use occlusion_core::Label;

/// Textured background with one fronto-parallel foreground slab; the occluded band
/// sits just left of the slab.
pub fn two_plane_scene(seed: u64, width: usize, height: usize) -> RenderedScene {
    let bg = (seed % 3) as f64;
    let jump = 4.0 + (seed % 4) as f64;
    let slab_w = width * 5 / 16;
    let spec = SceneSpec {
        width,
        height,
        background_disparity: bg,
        background_texture: Texture::Noise {
            seed: seed * 7 + 1,
            smoothness: 1.5,
        },
        layers: vec![Layer {
            rect: Rect {
                x: width * 3 / 8 + (seed as usize % 5),
                y: height / 5,
                w: slab_w,
                h: height * 3 / 5,
            },
            disparity: bg + jump,
            texture: Texture::Noise {
                seed: seed * 11 + 3,
                smoothness: 1.5,
            },
        }],
    };
    render(&spec, seed).unwrap()
}

/// Mean absolute disparity error over ground-truth occluded pixels.
pub fn occluded_epe(pred: &DisparityMap, scene: &RenderedScene) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, l) in scene.gt_mask.labels().iter().enumerate() {
        if *l == Label::Occluded {
            sum += (pred.data()[i] - scene.gt_disp.data()[i]).abs();
            n += 1;
        }
    }
    sum / n as f64
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
