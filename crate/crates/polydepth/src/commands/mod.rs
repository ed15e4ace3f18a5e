//! Subcommands. Each takes a resolved [`RunConfig`](crate::config::RunConfig),
//! processes frames on a bounded pool and writes outputs in frame order.

pub mod benchmark;
pub mod bev;
pub mod eval;
pub mod project;
pub mod recover;
pub mod synth;

use std::collections::BTreeMap;
use std::path::Path;

use polydepth_core::heatmap::decode_heatmap;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{read_text, Dataset, FrameId};
use crate::pipeline::{FrameInputs, HeightSource, PolygonSource, RefineSource, Skip, StageOptions};
use crate::raster::read_heatmap;
use crate::sidecar::{parse_heights, parse_polygons, parse_residuals, PolygonRecord};
use crate::{Error, Result};

/// Maps `f` over frames on `jobs` workers, keeping frame order.
pub fn run_frames<T, F>(jobs: usize, frames: &[FrameId], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&FrameId) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| frames.par_iter().map(&f).collect()))
}

fn sidecar_path(dir: &Path, f: &FrameId) -> std::path::PathBuf {
    dir.join(format!("{}.txt", f.name))
}

fn read_polygon_heatmaps(dir: &Path, f: &FrameId) -> Result<Vec<PolygonRecord>> {
    let frame_dir = dir.join(&f.name);
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(&frame_dir).map_err(|e| Error::io(&frame_dir, e))? {
        let path = entry.map_err(|e| Error::io(&frame_dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("hdr") {
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u32>().ok()) {
                ids.push(id);
            }
        }
    }
    ids.sort_unstable();
    ids.into_iter()
        .map(|id| {
            let hdr = frame_dir.join(format!("{id}.hdr"));
            let bin = frame_dir.join(format!("{id}.bin"));
            let payload = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
            let m = read_heatmap(&read_text(&hdr)?, &payload)
                .map_err(|e| Error::Format(format!("{}: {e}", hdr.display())))?;
            Ok(PolygonRecord { id, estimate: decode_heatmap(&m)? })
        })
        .collect()
}

/// Reads what the configured stages need for one frame. Labels are required
/// by the oracle stages and loaded when present otherwise.
pub fn load_inputs(ds: &Dataset, f: &FrameId, opts: &StageOptions) -> Result<FrameInputs> {
    let calib = ds.calib(f)?;
    let needs_labels = opts.polygon == PolygonSource::Oracle
        || opts.height == HeightSource::Oracle
        || opts.refine == RefineSource::Oracle;
    let labels = if needs_labels || ds.label_path(f).exists() { Some(ds.labels(f)?) } else { None };
    let polygons = match &opts.polygon {
        PolygonSource::Oracle => None,
        PolygonSource::File(dir) => {
            let p = sidecar_path(dir, f);
            Some(parse_polygons(&read_text(&p)?).map_err(|e| Error::parse(p, e))?)
        }
        PolygonSource::Heatmap(dir) => Some(read_polygon_heatmaps(dir, f)?),
    };
    let heights = match &opts.height {
        HeightSource::File(dir) => {
            let p = sidecar_path(dir, f);
            Some(parse_heights(&read_text(&p)?).map_err(|e| Error::parse(p, e))?.into_iter().collect())
        }
        _ => None,
    };
    let residuals = match &opts.refine {
        RefineSource::File(dir) => {
            let p = sidecar_path(dir, f);
            Some(parse_residuals(&read_text(&p)?).map_err(|e| Error::parse(p, e))?.into_iter().collect())
        }
        _ => None,
    };
    Ok(FrameInputs {
        frame: f.index,
        camera: Some(calib.intrinsics()),
        labels,
        polygons,
        heights,
        residuals,
    })
}

/// Counts shared by the per-frame commands' `summary.json`.
#[derive(Debug, Default, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub frames_failed: usize,
    pub objects: usize,
    pub skipped_objects: usize,
    pub skip_reasons: BTreeMap<&'static str, usize>,
    pub failures: Vec<FrameFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_roi_occupancy: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FrameFailure {
    pub frame: String,
    pub reason: String,
}

impl Summary {
    pub fn new(frames: usize) -> Self {
        Self { frames, ..Default::default() }
    }

    pub fn fail(&mut self, f: &FrameId, e: &Error) {
        log::warn!("frame {}: skipped: {e}", f.name);
        self.frames_failed += 1;
        self.failures.push(FrameFailure { frame: f.name.clone(), reason: e.to_string() });
    }

    pub fn skips(&mut self, f: &FrameId, skips: &[Skip]) {
        for s in skips {
            log::info!("frame {}: {s}", f.name);
            *self.skip_reasons.entry(s.reason.name()).or_default() += 1;
        }
        self.skipped_objects += skips.len();
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// A batch where every frame failed is an error; an empty batch too.
    pub fn check(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Data("no frames to process".into()));
        }
        if self.frames_failed == self.frames {
            return Err(Error::Data(format!("all {} frames failed", self.frames)));
        }
        Ok(())
    }
}
