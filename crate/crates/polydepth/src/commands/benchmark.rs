//! Noise sweep: oracle polygons and heights perturbed on a grid of
//! (sigma_px, sigma_height), recovered, optionally rasterized and refined,
//! then evaluated per cell.

use std::fmt::Write;

use polydepth_core::bev::{depth_to_points, rasterize_bev, BevGrid};
use polydepth_core::eval::{evaluate, Difficulty, GroundTruth, IouKind};

use crate::commands::run_frames;
use crate::config::RunConfig;
use crate::dataset::{write_file, FrameId};
use crate::pipeline::{process_frame, FrameInputs, FrameOutcome, PolygonSource, StageOptions};
use crate::report::COLUMN_GROUPS;
use crate::synth::{generate_frame, render_depth, SceneConfig};
use crate::{Error, Result};

pub const BIN_WIDTH: f64 = 0.25;
/// Regular bins cover `[0, BINS * BIN_WIDTH)`; one more bin takes the rest.
pub const BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub sigma_px: f64,
    pub sigma_height: f64,
    /// Recovered objects summed over replicas.
    pub objects: usize,
    pub skipped: usize,
    pub mean_abs_dx: f64,
    pub mean_abs_dz: f64,
    pub frac_dx_below_1m: f64,
    pub frac_dz_below_1m: f64,
    /// IoU-matched mean |dZ| from the evaluator, averaged over replicas.
    pub mean_depth_error: Option<f64>,
    /// Moderate AP in [`COLUMN_GROUPS`] order, averaged over replicas.
    pub ap_moderate: [Option<f64>; 4],
    pub mean_roi_occupancy: Option<f64>,
    pub hist_dx: [usize; BINS + 1],
    pub hist_dz: [usize; BINS + 1],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub frames: usize,
    pub frames_failed: usize,
    pub cells: Vec<CellResult>,
    pub sweep_csv: String,
    pub histogram_csv: String,
    pub svg: Option<String>,
}

fn bin(d: f64) -> usize {
    ((d / BIN_WIDTH).floor() as usize).min(BINS)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

struct FrameWork {
    gts: Vec<GroundTruth>,
    /// Indexed by `cell * replicas + replica`.
    outcomes: Vec<FrameOutcome>,
}

fn frame_inputs(cfg: &RunConfig, f: &FrameId) -> Result<(FrameInputs, Option<BevGrid>)> {
    let (inp, depth) = match cfg.dataset_root {
        None => {
            let scene = SceneConfig::kitti(cfg.stages.seed);
            let frame = generate_frame(&scene, f.index);
            let depth = cfg.depth_maps.then(|| render_depth(&scene, &frame.boxes()));
            let inp = FrameInputs {
                frame: f.index,
                camera: Some(scene.camera),
                labels: Some(frame.labels),
                ..Default::default()
            };
            (inp, depth)
        }
        Some(_) => {
            let ds = cfg.dataset()?;
            let inp = FrameInputs {
                frame: f.index,
                camera: Some(ds.calib(f)?.intrinsics()),
                labels: Some(ds.labels(f)?),
                ..Default::default()
            };
            let depth = if cfg.depth_maps { ds.depth(f)? } else { None };
            (inp, depth)
        }
    };
    let grid = match (depth, inp.camera) {
        (Some(d), Some(k)) => Some(rasterize_bev(&depth_to_points(&k, &d), &cfg.bev)?),
        _ => None,
    };
    Ok((inp, grid))
}

fn cell_options(cfg: &RunConfig) -> Vec<StageOptions> {
    let mut out = Vec::new();
    for &sp in &cfg.sigma_px_list {
        for &sh in &cfg.sigma_height_list {
            for r in 0..cfg.ensemble {
                out.push(StageOptions {
                    polygon: PolygonSource::Oracle,
                    sigma_px: sp,
                    sigma_height: sh,
                    replica: r,
                    ..cfg.stages.clone()
                });
            }
        }
    }
    out
}

/// Runs the sweep in memory. Replicas share random streams across cells,
/// so neighbouring cells differ only by the noise scale.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    let mut cfg = cfg.clone();
    let frames: Vec<FrameId> = match &cfg.dataset_root {
        None => {
            cfg.stages.seed = cfg.seed_for(true, "synthetic scene generation")?;
            (0..cfg.frames).map(FrameId::from_index).collect()
        }
        Some(_) => {
            let noisy = cfg.sigma_px_list.iter().chain(&cfg.sigma_height_list).any(|s| *s > 0.0);
            cfg.stages.seed = cfg.seed_for(noisy || !cfg.stages.residual_noise.is_zero(), "the noise sweep")?;
            cfg.dataset()?.frames(cfg.split_file.as_deref())?
        }
    };
    let options = cell_options(&cfg);
    let replicas = cfg.ensemble as usize;

    let work = run_frames(cfg.jobs, &frames, |f| -> Result<FrameWork> {
        let (inp, grid) = frame_inputs(&cfg, f)?;
        let mut gts = Vec::new();
        for (i, l) in inp.labels.iter().flatten().enumerate() {
            if let Some(g) = l.to_ground_truth(f.index, i as u32)? {
                gts.push(g);
            }
        }
        let outcomes = options.iter().map(|o| process_frame(&inp, grid.as_ref(), o)).collect();
        Ok(FrameWork { gts, outcomes })
    })?;

    let mut frames_failed = 0;
    let mut ok = Vec::new();
    for (f, w) in frames.iter().zip(work) {
        match w {
            Ok(w) => ok.push(w),
            Err(e) => {
                log::warn!("frame {}: skipped: {e}", f.name);
                frames_failed += 1;
            }
        }
    }
    if !frames.is_empty() && ok.is_empty() {
        return Err(Error::Data(format!("all {} frames failed", frames.len())));
    }
    let gts: Vec<GroundTruth> = ok.iter().flat_map(|w| w.gts.iter().cloned()).collect();

    let mut cells = Vec::new();
    for (c, chunk) in options.chunks(replicas).enumerate() {
        let (mut dx, mut dz, mut occ) = (Vec::new(), Vec::new(), Vec::new());
        let mut skipped = 0;
        let mut depth_errors = Vec::new();
        let mut aps: [Vec<f64>; 4] = Default::default();
        for r in 0..replicas {
            let idx = c * replicas + r;
            let mut dets = Vec::new();
            for w in &ok {
                let out = &w.outcomes[idx];
                skipped += out.skipped.len();
                for o in &out.objects {
                    if let Some(g) = o.ground_truth {
                        dx.push((o.coarse.box3d.x - g.x).abs());
                        dz.push((o.coarse.box3d.z - g.z).abs());
                    }
                    occ.extend(o.roi_occupancy);
                }
                dets.extend(out.final_detections());
            }
            if let Ok(report) = evaluate(&dets, &gts, &cfg.ap) {
                depth_errors.extend(report.mean_depth_error);
                for (k, (iou, kind)) in COLUMN_GROUPS.iter().enumerate() {
                    aps[k].extend(report.get(*kind, *iou, Difficulty::Moderate));
                }
            }
        }
        let mut hist_dx = [0usize; BINS + 1];
        let mut hist_dz = [0usize; BINS + 1];
        dx.iter().for_each(|d| hist_dx[bin(*d)] += 1);
        dz.iter().for_each(|d| hist_dz[bin(*d)] += 1);
        let n = dx.len();
        cells.push(CellResult {
            sigma_px: chunk[0].sigma_px,
            sigma_height: chunk[0].sigma_height,
            objects: n,
            skipped,
            mean_abs_dx: mean(dx.iter().copied()).unwrap_or(0.0),
            mean_abs_dz: mean(dz.iter().copied()).unwrap_or(0.0),
            frac_dx_below_1m: if n > 0 { dx.iter().filter(|d| **d < 1.0).count() as f64 / n as f64 } else { 0.0 },
            frac_dz_below_1m: if n > 0 { dz.iter().filter(|d| **d < 1.0).count() as f64 / n as f64 } else { 0.0 },
            mean_depth_error: mean(depth_errors.into_iter()),
            ap_moderate: aps.map(|v| mean(v.into_iter())),
            mean_roi_occupancy: mean(occ.into_iter()),
            hist_dx,
            hist_dz,
        });
    }

    let svg = cfg.svg.then(|| histogram_svg(&cells));
    Ok(BenchmarkOutput {
        frames: frames.len(),
        frames_failed,
        sweep_csv: sweep_csv(&cells),
        histogram_csv: histogram_csv(&cells),
        cells,
        svg,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("sigma_px,sigma_height,objects,skipped,mean_abs_dx,mean_abs_dz,frac_dx_below_1m,frac_dz_below_1m,mean_depth_error");
    for (iou, kind) in COLUMN_GROUPS {
        let name = match kind {
            IouKind::Bev => "bev",
            IouKind::ThreeD => "3d",
        };
        write!(s, ",ap_{name}_{}_moderate", if iou == 0.5 { "05" } else { "07" }).unwrap();
    }
    s.push_str(",mean_roi_occupancy\n");
    for c in cells {
        write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.sigma_px,
            c.sigma_height,
            c.objects,
            c.skipped,
            c.mean_abs_dx,
            c.mean_abs_dz,
            c.frac_dx_below_1m,
            c.frac_dz_below_1m,
            opt(c.mean_depth_error)
        )
        .unwrap();
        for ap in c.ap_moderate {
            write!(s, ",{}", opt(ap)).unwrap();
        }
        writeln!(s, ",{}", opt(c.mean_roi_occupancy)).unwrap();
    }
    s
}

pub fn histogram_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("sigma_px,sigma_height,axis,bin_low,bin_high,count\n");
    for c in cells {
        for (axis, hist) in [("x", &c.hist_dx), ("z", &c.hist_dz)] {
            for (i, n) in hist.iter().enumerate() {
                let lo = i as f64 * BIN_WIDTH;
                let hi = if i == BINS { "inf".to_string() } else { ((i + 1) as f64 * BIN_WIDTH).to_string() };
                writeln!(s, "{},{},{axis},{lo},{hi},{n}", c.sigma_px, c.sigma_height).unwrap();
            }
        }
    }
    s
}

/// One row per cell, |dX| and |dZ| histograms side by side.
pub fn histogram_svg(cells: &[CellResult]) -> String {
    let (pw, ph, pad) = (320.0, 110.0, 30.0);
    let width = 2.0 * (pw + pad) + pad;
    let height = cells.len() as f64 * (ph + pad) + pad;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#).unwrap();
    for (r, c) in cells.iter().enumerate() {
        for (col, (axis, hist)) in [("|dX|", &c.hist_dx), ("|dZ|", &c.hist_dz)].iter().enumerate() {
            let x0 = pad + col as f64 * (pw + pad);
            let y0 = pad + r as f64 * (ph + pad);
            let max = hist.iter().copied().max().unwrap_or(0).max(1) as f64;
            let bw = pw / (BINS + 1) as f64;
            writeln!(
                s,
                r#"<text x="{x0}" y="{}">{axis} sigma_px={} sigma_h={} (0.25 m bins, last bin open)</text>"#,
                y0 - 6.0,
                c.sigma_px,
                c.sigma_height
            )
            .unwrap();
            writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##).unwrap();
            for (i, n) in hist.iter().enumerate() {
                let h = ph * *n as f64 / max;
                writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab0"/>"##,
                    x0 + i as f64 * bw + 1.0,
                    y0 + ph - h,
                    bw - 2.0,
                    h
                )
                .unwrap();
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `sweep.csv`, `histograms.csv` and optionally `histograms.svg`.
pub fn run(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    let out = run_benchmark(cfg)?;
    write_file(&cfg.out.join("sweep.csv"), &out.sweep_csv)?;
    write_file(&cfg.out.join("histograms.csv"), &out.histogram_csv)?;
    if let Some(svg) = &out.svg {
        write_file(&cfg.out.join("histograms.svg"), svg)?;
    }
    Ok(out)
}
