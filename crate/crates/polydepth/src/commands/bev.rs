use polydepth_core::bev::{depth_to_points, extract_3d_roi, rasterize_bev};

use crate::commands::{run_frames, Summary};
use crate::config::RunConfig;
use crate::dataset::{read_text, write_file};
use crate::kitti::parse_predictions;
use crate::raster::{write_bev, write_roi};
use crate::{Error, Result};

struct Exported {
    grid: (String, Vec<u8>),
    rois: Vec<(u32, (String, Vec<u8>))>,
}

/// Writes `bev/<frame>.hdr` + `.bin` for every frame with a depth map and,
/// with `--predictions`, `roi/<frame>/<det>.hdr` + `.bin` per detection.
pub fn run(cfg: &RunConfig) -> Result<Summary> {
    let ds = cfg.dataset()?;
    let frames = ds.frames(cfg.split_file.as_deref())?;
    let results = run_frames(cfg.jobs, &frames, |f| -> Result<Exported> {
        let k = ds.calib(f)?.intrinsics();
        let depth = ds
            .depth(f)?
            .ok_or_else(|| Error::Data(format!("no depth map at {}", ds.depth_path(f).display())))?;
        let grid = rasterize_bev(&depth_to_points(&k, &depth), &cfg.bev)?;
        let mut rois = Vec::new();
        if let Some(dir) = &cfg.predictions {
            let p = dir.join(format!("{}.txt", f.name));
            if p.exists() {
                for (_, d) in parse_predictions(&read_text(&p)?, f.index).map_err(|e| Error::parse(&p, e))? {
                    match extract_3d_roi(&grid, &d.box3d, &cfg.stages.roi) {
                        Ok(roi) => rois.push((d.id, write_roi(&roi))),
                        Err(e) => log::info!("frame {} detection {}: no ROI: {e}", f.name, d.id),
                    }
                }
            }
        }
        Ok(Exported { grid: write_bev(&grid), rois })
    })?;

    let mut summary = Summary::new(frames.len());
    for (f, r) in frames.iter().zip(results) {
        match r {
            Err(e) => summary.fail(f, &e),
            Ok(ex) => {
                summary.objects += ex.rois.len();
                let base = cfg.out.join("bev");
                write_file(&base.join(format!("{}.hdr", f.name)), &ex.grid.0)?;
                write_file(&base.join(format!("{}.bin", f.name)), &ex.grid.1)?;
                for (id, (h, data)) in ex.rois {
                    let dir = cfg.out.join("roi").join(&f.name);
                    write_file(&dir.join(format!("{id}.hdr")), h)?;
                    write_file(&dir.join(format!("{id}.bin")), data)?;
                }
            }
        }
    }
    write_file(&cfg.out.join("summary.json"), summary.to_json())?;
    summary.check()?;
    Ok(summary)
}
