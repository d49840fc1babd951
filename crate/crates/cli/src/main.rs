//! `goat` command-line tool: occlusion masks, GOAPP post-processing, evaluation,
//! reconstruction, GOAT optimization, synthetic scenes and occlusion statistics.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use occlusion_core::geometry::{
    occlusion_mask, occlusion_stats, DEFAULT_BIN_TOLERANCE, DEFAULT_DEPTH_CAP,
};
use occlusion_core::goapp::{goapp, DEFAULT_NEIGHBORS};
use occlusion_core::goat::{goat_optimize, GoatConfig};
use occlusion_core::imgio::{
    read_intensity, read_kitti_disparity_png, read_pfm, write_intensity, write_kitti_disparity_png,
    write_pfm, PfmImage,
};
use occlusion_core::metrics::{evaluate, Region, RegionClass};
use occlusion_core::synth::render;
use occlusion_core::warp::{reconstruct_left, reconstruction_error_map};
use occlusion_core::{CameraCalib, DisparityMap, Field, Label, OcclusionMask, SceneSpec};

#[derive(Parser, Debug)]
#[command(name = "goat", version, about = "Occlusion-aware stereo tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label every pixel of a left disparity map as visible, occluded, exclusive or invalid.
    Occlusion {
        disp: PathBuf,
        out_mask: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Refill occluded disparities from their visible row neighbours.
    Goapp {
        disp: PathBuf,
        out: PathBuf,
        /// Mask PNG; computed from the disparity when omitted.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BIN_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Depth and disparity error metrics of a prediction against ground truth.
    Evaluate {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, default_value_t = CameraCalib::kitti().focal())]
        focal: f64,
        #[arg(long, default_value_t = CameraCalib::kitti().baseline())]
        baseline: f64,
        #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
        cap: f64,
        #[arg(long, value_enum, default_value_t = RegionArg::All)]
        region: RegionArg,
        /// Mask PNG for `--region`; computed from the ground truth when omitted.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BIN_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Rebuild the left image from the right view and a left disparity map.
    Reconstruct {
        left: PathBuf,
        right: PathBuf,
        disp: PathBuf,
        out_image: PathBuf,
        /// Per-pixel |left - reconstruction|, as PNG or PFM by extension.
        out_error: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Optimize a disparity field directly with the occlusion-aware training schedule.
    Goat {
        left: PathBuf,
        right: PathBuf,
        out_disp: PathBuf,
        out_mask: PathBuf,
        out_trace: PathBuf,
        /// TOML file with GoatConfig fields; missing fields keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ground-truth disparity, adds per-epoch EPE to the trace.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Write the disparity and mask at the end of every epoch into this directory.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Render a layered synthetic stereo scene from a text description.
    Synth {
        spec: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Disparity error split between occluded and visible pixels.
    Stats {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_TOLERANCE)]
        tol: f64,
        /// Mask PNG; computed from the ground truth when omitted.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct FormatArg {
    /// Disparity file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<DispFormat>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DispFormat {
    Pfm,
    Png,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum RegionArg {
    All,
    Visible,
    Occluded,
}

impl FormatArg {
    fn resolve(self, path: &Path) -> Result<DispFormat> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("pfm") => Ok(DispFormat::Pfm),
            Some("png") => Ok(DispFormat::Png),
            _ => anyhow::bail!(
                "cannot infer disparity format of {}; use --format",
                path.display()
            ),
        }
    }

    fn read(self, path: &Path) -> Result<DisparityMap> {
        let map = match self.resolve(path)? {
            DispFormat::Pfm => read_pfm(path)?.into_disparity()?,
            DispFormat::Png => read_kitti_disparity_png(path)?,
        };
        Ok(map)
    }

    fn write(self, map: &DisparityMap, path: &Path) -> Result<()> {
        match self.resolve(path)? {
            DispFormat::Pfm => write_pfm(&PfmImage::from_disparity(map), path)?,
            DispFormat::Png => write_kitti_disparity_png(map, path)?,
        }
        Ok(())
    }
}

fn mask_or_computed(path: Option<&Path>, disp: &DisparityMap, tol: f64) -> Result<OcclusionMask> {
    match path {
        Some(p) => Ok(OcclusionMask::read_png(p)?),
        None => Ok(occlusion_mask(disp, tol)),
    }
}

fn print_mask_counts(mask: &OcclusionMask) {
    println!("visible={}", mask.count(Label::Visible));
    println!("occluded={}", mask.count(Label::Occluded));
    println!("exclusive={}", mask.count(Label::Exclusive));
    println!("invalid={}", mask.count(Label::Invalid));
    println!("masked_fraction={}", mask.masked_fraction());
}

fn write_field(field: &Field, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => write_pfm(&PfmImage::from_field(field), path)?,
        _ => write_intensity(
            &occlusion_core::IntensityImage::from_fn(field.width, field.height, |x, y| {
                field.get(x, y)
            }),
            path,
        )?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Occlusion {
            disp,
            out_mask,
            tol,
            format,
        } => {
            let d = format.read(&disp)?;
            let mask = occlusion_mask(&d, tol);
            mask.write_png(&out_mask)?;
            print_mask_counts(&mask);
        }
        Command::Goapp {
            disp,
            out,
            mask,
            n,
            tol,
            format,
        } => {
            let d = format.read(&disp)?;
            let m = mask_or_computed(mask.as_deref(), &d, tol)?;
            let filled = goapp(&d, &m, n)?;
            format.write(&filled, &out)?;
            let changed = filled
                .data()
                .iter()
                .zip(d.data())
                .filter(|(a, b)| a.to_bits() != b.to_bits())
                .count();
            println!("filled={changed}");
        }
        Command::Evaluate {
            pred,
            gt,
            focal,
            baseline,
            cap,
            region,
            mask,
            tol,
            format,
        } => {
            let p = format.read(&pred)?;
            let g = format.read(&gt)?;
            let calib = CameraCalib::new(focal, baseline)?;
            let m = match region {
                RegionArg::All => None,
                _ => Some(mask_or_computed(mask.as_deref(), &g, tol)?),
            };
            let region = m.as_ref().map(|mask| Region {
                mask,
                class: if region == RegionArg::Visible {
                    RegionClass::Visible
                } else {
                    RegionClass::Occluded
                },
            });
            let report = evaluate(&p, &g, &calib, cap, region)?;
            print!("{}", report.key_values());
        }
        Command::Reconstruct {
            left,
            right,
            disp,
            out_image,
            out_error,
            format,
        } => {
            let l = read_intensity(&left)?;
            let r = read_intensity(&right)?;
            let d = format.read(&disp)?;
            let recon = reconstruct_left(&r, &d)?;
            let err = reconstruction_error_map(&l, &recon.image)?;
            write_intensity(&recon.image, &out_image)?;
            write_field(&err, &out_error)?;
            let n = err.data.len().max(1) as f64;
            println!("mean_error={}", err.data.iter().sum::<f64>() / n);
            println!(
                "out_of_bounds={}",
                recon.in_bounds.iter().filter(|b| !**b).count()
            );
        }
        Command::Goat {
            left,
            right,
            out_disp,
            out_mask,
            out_trace,
            config,
            gt,
            snapshots,
            format,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str::<GoatConfig>(&text)
                        .with_context(|| format!("parsing {}", p.display()))?
                }
                None => GoatConfig::default(),
            };
            cfg.keep_snapshots = snapshots.is_some();
            let l = read_intensity(&left)?;
            let r = read_intensity(&right)?;
            let g = gt.as_deref().map(|p| format.read(p)).transpose()?;
            let out = goat_optimize(&l, &r, &cfg, g.as_ref())?;
            format.write(&out.disparity, &out_disp)?;
            out.mask.write_png(&out_mask)?;
            fs::write(&out_trace, out.trace.to_table())
                .with_context(|| format!("writing {}", out_trace.display()))?;
            if let Some(dir) = &snapshots {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for (i, (d, m)) in out.trace.snapshots.iter().enumerate() {
                    write_pfm(
                        &PfmImage::from_disparity(d),
                        dir.join(format!("epoch_{:03}_disp.pfm", i + 1)),
                    )?;
                    m.write_png(dir.join(format!("epoch_{:03}_mask.png", i + 1)))?;
                }
            }
            println!("epochs={}", out.trace.epochs.len());
            if let Some(last) = out.trace.epochs.last() {
                println!("final_loss={}", last.loss_end);
                if let Some(epe) = last.epe {
                    println!("final_epe={epe}");
                }
            }
            println!("masked_fraction={}", out.mask.masked_fraction());
        }
        Command::Synth {
            spec,
            out_dir,
            seed,
        } => {
            let text =
                fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let scene_spec: SceneSpec = text.parse()?;
            let scene = render(&scene_spec, seed)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            write_intensity(&scene.left, out_dir.join("left.png"))?;
            write_intensity(&scene.right, out_dir.join("right.png"))?;
            write_pfm(
                &PfmImage::from_disparity(&scene.gt_disp),
                out_dir.join("disp.pfm"),
            )?;
            scene.gt_mask.write_png(out_dir.join("mask.png"))?;
            print_mask_counts(&scene.gt_mask);
        }
        Command::Stats {
            pred,
            gt,
            tol,
            mask,
            format,
        } => {
            let p = format.read(&pred)?;
            let g = format.read(&gt)?;
            let m = mask_or_computed(mask.as_deref(), &g, tol)?;
            let s = occlusion_stats(&p, &g, &m)?;
            println!("mean_error_occluded={}", s.mean_error_occluded);
            println!("mean_error_visible={}", s.mean_error_visible);
            println!("error_ratio={}", s.error_ratio());
            println!(
                "total_error_share_occluded={}",
                s.total_error_share_occluded
            );
            println!(
                "total_error_share_visible={}",
                s.total_error_share_visible()
            );
            println!("area_share_occluded={}", s.area_share_occluded);
            println!("area_share_visible={}", s.area_share_visible());
            println!("n_occluded={}", s.n_occluded);
            println!("n_visible={}", s.n_visible);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
