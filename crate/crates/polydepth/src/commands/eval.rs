use polydepth_core::eval::{evaluate, Detection, EvalReport, GroundTruth};

use crate::commands::run_frames;
use crate::config::RunConfig;
use crate::dataset::{read_text, write_file};
use crate::kitti::parse_predictions;
use crate::report::{report_json, report_table};
use crate::{Error, Result};

/// Row order inside a result file carries no meaning, so detections are
/// re-identified by content before evaluation; a shuffled file then
/// evaluates identically.
fn canonical_order(mut dets: Vec<Detection>) -> Vec<Detection> {
    let key = |d: &Detection| {
        let b = d.box3d;
        [d.score, b.x, b.y, b.z, b.l, b.w, b.h, b.theta]
    };
    dets.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb[0].total_cmp(&ka[0]).then_with(|| {
            ka[1..].iter().zip(&kb[1..]).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for (i, d) in dets.iter_mut().enumerate() {
        d.id = i as u32;
    }
    dets
}

/// Ground truth from the dataset labels and detections of the target class
/// from `--predictions`; a frame without a result file has no detections.
pub fn collect(cfg: &RunConfig) -> Result<(Vec<Detection>, Vec<GroundTruth>)> {
    let ds = cfg.dataset()?;
    let pred_dir = cfg
        .predictions
        .as_ref()
        .ok_or_else(|| Error::Config("eval needs --predictions".into()))?;
    let frames = ds.frames(cfg.split_file.as_deref())?;
    let class = &cfg.ap.target_class;
    let per_frame = run_frames(cfg.jobs, &frames, |f| -> Result<(Vec<Detection>, Vec<GroundTruth>)> {
        let mut gts = Vec::new();
        for (i, l) in ds.labels(f)?.iter().enumerate() {
            if let Some(g) = l.to_ground_truth(f.index, i as u32).map_err(|e| {
                Error::Data(format!("{}: row {}: {e}", ds.label_path(f).display(), i + 1))
            })? {
                gts.push(g);
            }
        }
        let p = pred_dir.join(format!("{}.txt", f.name));
        let dets = if p.exists() {
            let parsed = parse_predictions(&read_text(&p)?, f.index).map_err(|e| Error::parse(&p, e))?;
            canonical_order(parsed.into_iter().filter(|(c, _)| c == class).map(|(_, d)| d).collect())
        } else {
            Vec::new()
        };
        Ok((dets, gts))
    })?;
    let (mut dets, mut gts) = (Vec::new(), Vec::new());
    for r in per_frame {
        let (d, g) = r?;
        dets.extend(d);
        gts.extend(g);
    }
    Ok((dets, gts))
}

/// Writes `report.txt` and `report.json`; returns the report and its table.
pub fn run(cfg: &RunConfig) -> Result<(EvalReport, String)> {
    let (dets, gts) = collect(cfg)?;
    let report = evaluate(&dets, &gts, &cfg.ap).map_err(|e| Error::Data(format!("evaluation: {e}")))?;
    let table = report_table(&report, "polydepth");
    write_file(&cfg.out.join("report.txt"), &table)?;
    write_file(&cfg.out.join("report.json"), report_json(&report))?;
    Ok((report, table))
}
