use polydepth_core::bev::{depth_to_points, rasterize_bev};

use crate::commands::{load_inputs, run_frames, Summary};
use crate::config::RunConfig;
use crate::dataset::write_file;
use crate::kitti::write_predictions;
use crate::pipeline::{process_frame, FrameOutcome, RefineSource};
use crate::Result;

/// Writes `coarse/<frame>.txt`, `refined/<frame>.txt` when refinement is on,
/// and `summary.json`. With refinement on, frames that have a depth map also
/// get a BEV grid and a 3D-ROI per box.
pub fn run(cfg: &RunConfig) -> Result<Summary> {
    let ds = cfg.dataset()?;
    let mut opts = cfg.stages.clone();
    opts.seed = cfg.seed_for(cfg.pipeline_is_stochastic(), "the configured oracle noise")?;
    let refine = opts.refine != RefineSource::Off;
    let frames = ds.frames(cfg.split_file.as_deref())?;
    let results = run_frames(cfg.jobs, &frames, |f| -> Result<FrameOutcome> {
        let inp = load_inputs(&ds, f, &opts)?;
        let grid = match (refine, inp.camera) {
            (true, Some(k)) => match ds.depth(f)? {
                Some(d) => Some(rasterize_bev(&depth_to_points(&k, &d), &cfg.bev)?),
                None => None,
            },
            _ => None,
        };
        Ok(process_frame(&inp, grid.as_ref(), &opts))
    })?;

    let mut summary = Summary::new(frames.len());
    let (mut occ_sum, mut occ_n) = (0.0, 0usize);
    let class = &opts.class;
    for (f, r) in frames.iter().zip(results) {
        match r {
            Err(e) => summary.fail(f, &e),
            Ok(out) => {
                summary.skips(f, &out.skipped);
                summary.objects += out.objects.len();
                for occ in out.objects.iter().filter_map(|o| o.roi_occupancy) {
                    occ_sum += occ;
                    occ_n += 1;
                }
                let name = format!("{}.txt", f.name);
                write_file(&cfg.out.join("coarse").join(&name), write_predictions(&out.coarse_detections(), class))?;
                if refine {
                    write_file(&cfg.out.join("refined").join(&name), write_predictions(&out.final_detections(), class))?;
                }
            }
        }
    }
    summary.mean_roi_occupancy = (occ_n > 0).then(|| occ_sum / occ_n as f64);
    write_file(&cfg.out.join("summary.json"), summary.to_json())?;
    summary.check()?;
    Ok(summary)
}
