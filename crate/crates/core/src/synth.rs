//! Layered fronto-parallel stereo scenes with analytic ground truth.
//!
//! Every surface is textured in left-image coordinates, so the right view of a
//! surface point at left column `u` appears at column `u - d`. Layers are painted
//! in disparity order (nearest on top) in both views.
//!
//! Scenes are described in a line-oriented text format:
//!
//! ```text
//! # comment
//! size <width> <height>
//! background <disparity> <texture>
//! layer <x> <y> <w> <h> <disparity> <texture>
//! ```
//!
//! where `<texture>` is `checker <period>`, `noise <seed> <smoothness>` or
//! `gradient`. `size` and `background` are required; `layer` may repeat.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Label, OcclusionMask};
use crate::imgio::{DisparityMap, IntensityImage};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Texture {
    /// Alternating 0.2 / 0.8 squares of side `period` px.
    Checker { period: f64 },
    /// Value noise on a lattice of spacing `smoothness` px, bilinearly interpolated.
    Noise { seed: u64, smoothness: f64 },
    /// Diagonal ramp, periodic every 32 px.
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    fn contains(&self, u: f64, v: usize) -> bool {
        v >= self.y && v < self.y + self.h && u >= self.x as f64 && u < (self.x + self.w) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layer {
    pub rect: Rect,
    pub disparity: f64,
    pub texture: Texture,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background_disparity: f64,
    pub background_texture: Texture,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedScene {
    pub left: IntensityImage,
    pub right: IntensityImage,
    pub gt_disp: DisparityMap,
    pub gt_mask: OcclusionMask,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl Texture {
    fn validate(&self) -> Result<()> {
        match *self {
            Texture::Checker { period } if !(period > 0.0 && period.is_finite()) => {
                Err(invalid(format!("checker period {period} must be > 0")))
            }
            Texture::Noise { smoothness, .. } if !(smoothness > 0.0 && smoothness.is_finite()) => {
                Err(invalid(format!(
                    "noise smoothness {smoothness} must be > 0"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Intensity of the surface point at left column `u`, row `v`.
    fn sample(&self, u: f64, v: usize, scene_seed: u64) -> f64 {
        match *self {
            Texture::Checker { period } => {
                let cx = (u / period).floor() as i64;
                let cy = (v as f64 / period).floor() as i64;
                if (cx + cy).rem_euclid(2) == 0 {
                    0.2
                } else {
                    0.8
                }
            }
            Texture::Noise { seed, smoothness } => {
                let s = mix(seed, scene_seed);
                let gx = u / smoothness;
                let gy = v as f64 / smoothness;
                let (x0, y0) = (gx.floor(), gy.floor());
                let (fx, fy) = (gx - x0, gy - y0);
                let (ix, iy) = (x0 as i64, y0 as i64);
                let at = |i: i64, j: i64| lattice(s, i, j);
                let top = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
                let bottom = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
                top * (1.0 - fy) + bottom * fy
            }
            Texture::Gradient => 0.1 + 0.8 * ((u + v as f64) / 32.0).rem_euclid(1.0),
        }
    }
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(a ^ splitmix(b))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice value in `[0.1, 0.9]`.
fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = mix(seed, mix(i as u64, j as u64));
    0.1 + 0.8 * ((h >> 11) as f64 / (1u64 << 53) as f64)
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("scene must be at least 1x1"));
        }
        let bg = self.background_disparity;
        if !(bg >= 0.0 && bg.is_finite()) {
            return Err(invalid(format!(
                "background disparity {bg} must be finite and >= 0"
            )));
        }
        self.background_texture.validate()?;
        for (i, l) in self.layers.iter().enumerate() {
            let r = l.rect;
            if r.w == 0 || r.h == 0 || r.x + r.w > self.width || r.y + r.h > self.height {
                return Err(invalid(format!(
                    "layer {i}: rect {r:?} not inside the image"
                )));
            }
            if !(l.disparity.is_finite() && l.disparity > bg) {
                return Err(invalid(format!(
                    "layer {i}: disparity {} must exceed the background disparity {bg}",
                    l.disparity
                )));
            }
            l.texture.validate()?;
        }
        Ok(())
    }

    /// Surfaces as `(disparity, texture, rect)` sorted far to near; later layers win ties.
    fn depth_order(&self) -> Vec<&Layer> {
        let mut order: Vec<&Layer> = self.layers.iter().collect();
        order.sort_by(|a, b| a.disparity.total_cmp(&b.disparity));
        order
    }

    /// Nearest surface seen by the left camera at `(u, v)`.
    fn left_surface(&self, order: &[&Layer], u: usize, v: usize) -> (f64, Texture) {
        order
            .iter()
            .rev()
            .find(|l| l.rect.contains(u as f64, v))
            .map(|l| (l.disparity, l.texture))
            .unwrap_or((self.background_disparity, self.background_texture))
    }

    /// Nearest surface seen by the right camera at column `x` (possibly fractional).
    fn right_surface(&self, order: &[&Layer], x: f64, v: usize) -> (f64, Texture) {
        order
            .iter()
            .rev()
            .find(|l| l.rect.contains(x + l.disparity, v))
            .map(|l| (l.disparity, l.texture))
            .unwrap_or((self.background_disparity, self.background_texture))
    }

    /// Generates a valid scene with integer disparities and horizontally disjoint
    /// layers, spaced so that each layer's occlusion band falls on the background.
    pub fn random(seed: u64, width: usize, height: usize, max_layers: usize) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background_disparity = f64::from(rng.gen_range(0u32..=4));
        let mut spec = SceneSpec {
            width,
            height,
            background_disparity,
            background_texture: Texture::Noise {
                seed: rng.gen(),
                smoothness: rng.gen_range(1.0..3.0),
            },
            layers: Vec::new(),
        };
        let mut cursor = 0usize;
        for _ in 0..max_layers {
            let d = background_disparity + f64::from(rng.gen_range(1u32..=10));
            let jump = (d - background_disparity) as usize;
            let min_x = (cursor + jump + 1).max(d as usize);
            // Wider than the jump, so the occluded band reaches the layer edge.
            let lw = rng.gen_range(3..=(width / 4).max(3)).max(jump + 1);
            if min_x + lw + 1 > width {
                break;
            }
            let x = rng.gen_range(min_x..=(width - lw - 1).min(min_x + width / 6));
            let lh = rng.gen_range(2..=height.max(2));
            let lh = lh.min(height);
            let y = rng.gen_range(0..=height - lh);
            let texture = match rng.gen_range(0..3) {
                0 => Texture::Checker {
                    period: f64::from(rng.gen_range(2u32..6)),
                },
                1 => Texture::Gradient,
                _ => Texture::Noise {
                    seed: rng.gen(),
                    smoothness: rng.gen_range(1.0..3.0),
                },
            };
            spec.layers.push(Layer {
                rect: Rect { x, y, w: lw, h: lh },
                disparity: d,
                texture,
            });
            cursor = x + lw;
        }
        spec
    }
}

/// Renders both views, the left ground-truth disparity and the analytic mask.
///
/// A left pixel is exclusive when `u - d < 0` and occluded when the right camera
/// sees a nearer surface at column `u - d`.
pub fn render(spec: &SceneSpec, seed: u64) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let order = spec.depth_order();

    let mut left = Vec::with_capacity(w * h);
    let mut right = Vec::with_capacity(w * h);
    let mut disp = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (d, tex) = spec.left_surface(&order, u, v);
            left.push(tex.sample(u as f64, v, seed));
            disp.push(d);
            let target = u as f64 - d;
            labels.push(if target < 0.0 {
                Label::Exclusive
            } else if spec.right_surface(&order, target, v).0 > d {
                Label::Occluded
            } else {
                Label::Visible
            });

            let (rd, rtex) = spec.right_surface(&order, u as f64, v);
            right.push(rtex.sample(u as f64 + rd, v, seed));
        }
    }
    Ok(RenderedScene {
        left: IntensityImage::new(w, h, left)?,
        right: IntensityImage::new(w, h, right)?,
        gt_disp: DisparityMap::new(w, h, disp)?,
        gt_mask: OcclusionMask::new(w, h, labels)?,
    })
}

fn parse_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::format("scene", format!("line {line}: {msg}"))
}

fn parse_num<T: FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

fn parse_texture<'a>(toks: &mut impl Iterator<Item = &'a str>, line: usize) -> Result<Texture> {
    match toks.next() {
        Some("checker") => Ok(Texture::Checker {
            period: parse_num(toks.next(), "checker period", line)?,
        }),
        Some("noise") => Ok(Texture::Noise {
            seed: parse_num(toks.next(), "noise seed", line)?,
            smoothness: parse_num(toks.next(), "noise smoothness", line)?,
        }),
        Some("gradient") => Ok(Texture::Gradient),
        Some(other) => Err(parse_err(line, format!("unknown texture {other:?}"))),
        None => Err(parse_err(line, "missing texture")),
    }
}

impl FromStr for SceneSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut size = None;
        let mut background = None;
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            match toks.next() {
                Some("size") => {
                    size = Some((
                        parse_num::<usize>(toks.next(), "width", line)?,
                        parse_num::<usize>(toks.next(), "height", line)?,
                    ))
                }
                Some("background") => {
                    let d = parse_num::<f64>(toks.next(), "disparity", line)?;
                    background = Some((d, parse_texture(&mut toks, line)?));
                }
                Some("layer") => {
                    let rect = Rect {
                        x: parse_num(toks.next(), "x", line)?,
                        y: parse_num(toks.next(), "y", line)?,
                        w: parse_num(toks.next(), "w", line)?,
                        h: parse_num(toks.next(), "h", line)?,
                    };
                    let disparity = parse_num(toks.next(), "disparity", line)?;
                    let texture = parse_texture(&mut toks, line)?;
                    layers.push(Layer {
                        rect,
                        disparity,
                        texture,
                    });
                }
                Some(other) => return Err(parse_err(line, format!("unknown directive {other:?}"))),
                None => unreachable!(),
            }
            if let Some(extra) = toks.next() {
                return Err(parse_err(line, format!("unexpected token {extra:?}")));
            }
        }
        let (width, height) = size.ok_or_else(|| Error::format("scene", "missing `size` line"))?;
        let (background_disparity, background_texture) =
            background.ok_or_else(|| Error::format("scene", "missing `background` line"))?;
        let spec = SceneSpec {
            width,
            height,
            background_disparity,
            background_texture,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for Texture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Texture::Checker { period } => write!(f, "checker {period}"),
            Texture::Noise { seed, smoothness } => write!(f, "noise {seed} {smoothness}"),
            Texture::Gradient => write!(f, "gradient"),
        }
    }
}

impl fmt::Display for SceneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "size {} {}", self.width, self.height)?;
        writeln!(
            f,
            "background {} {}",
            self.background_disparity, self.background_texture
        )?;
        for l in &self.layers {
            let r = l.rect;
            writeln!(
                f,
                "layer {} {} {} {} {} {}",
                r.x, r.y, r.w, r.h, l.disparity, l.texture
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PLANES: &str = "\
# background plane with a square in front
size 64 32
background 2 noise 7 2
layer 20 8 20 16 8 checker 3
";

    #[test]
    fn parse_and_print_round_trip() {
        let spec: SceneSpec = TWO_PLANES.parse().unwrap();
        assert_eq!(spec.layers.len(), 1);
        let again: SceneSpec = spec.to_string().parse().unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = "size 4 4\nbackground 0 gradient\nlayer 0 0 2 2 x gradient\n"
            .parse::<SceneSpec>()
            .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!("size 4 4\n".parse::<SceneSpec>().is_err());
        assert!("size 4 4\nbackground 0 marble\n"
            .parse::<SceneSpec>()
            .is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        // Layer not nearer than the background.
        assert!(
            "size 8 8\nbackground 3 gradient\nlayer 0 0 2 2 3 gradient\n"
                .parse::<SceneSpec>()
                .is_err()
        );
        // Layer outside the image.
        assert!(
            "size 8 8\nbackground 0 gradient\nlayer 7 0 2 2 3 gradient\n"
                .parse::<SceneSpec>()
                .is_err()
        );
    }

    #[test]
    fn single_plane_at_zero_disparity() {
        let spec: SceneSpec = "size 16 8\nbackground 0 noise 1 1.5\n".parse().unwrap();
        let s = render(&spec, 5).unwrap();
        assert_eq!(s.left, s.right);
        assert_eq!(s.gt_mask.count(Label::Visible), 16 * 8);
    }

    #[test]
    fn occluded_band_matches_disparity_jump() {
        let spec: SceneSpec = TWO_PLANES.parse().unwrap();
        let s = render(&spec, 0).unwrap();
        for v in 8..24 {
            let labels = s.gt_mask.row(v);
            assert_eq!(labels[13], Label::Visible);
            assert!(
                labels[14..20].iter().all(|l| *l == Label::Occluded),
                "row {v}"
            );
            assert!(labels[20..40].iter().all(|l| *l == Label::Visible));
            assert_eq!(labels[0..2], [Label::Exclusive, Label::Exclusive]);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = SceneSpec::random(11, 48, 24, 3);
        assert_eq!(render(&spec, 3).unwrap(), render(&spec, 3).unwrap());
        assert_ne!(
            render(&spec, 3).unwrap().left,
            render(&spec, 4).unwrap().left
        );
    }

    #[test]
    fn random_specs_are_valid() {
        for seed in 0..50 {
            SceneSpec::random(seed, 64, 32, 4).validate().unwrap();
        }
    }
}
