use std::fmt::Write;

use crate::commands::{load_inputs, run_frames, Summary};
use crate::config::RunConfig;
use crate::dataset::write_file;
use crate::pipeline::project_frame;
use crate::sidecar::write_polygons;
use crate::Result;

/// Writes `polygons/<frame>.txt`, `overlay.csv` (one row per vertex) and
/// `summary.json` under the output directory.
pub fn run(cfg: &RunConfig) -> Result<Summary> {
    let ds = cfg.dataset()?;
    let mut opts = cfg.stages.clone();
    opts.seed = cfg.seed_for(opts.sigma_px > 0.0, "polygon noise")?;
    let frames = ds.frames(cfg.split_file.as_deref())?;
    let results = run_frames(cfg.jobs, &frames, |f| {
        load_inputs(&ds, f, &opts).map(|inp| project_frame(&inp, &opts))
    })?;

    let mut summary = Summary::new(frames.len());
    let mut overlay = String::from("frame,object,vertex,u,v,score\n");
    for (f, r) in frames.iter().zip(results) {
        match r {
            Err(e) => summary.fail(f, &e),
            Ok((records, skips)) => {
                summary.skips(f, &skips);
                summary.objects += records.len();
                for rec in &records {
                    for (k, (p, s)) in rec.estimate.polygon.vertices.iter().zip(rec.estimate.scores).enumerate() {
                        writeln!(overlay, "{},{},{},{},{},{}", f.name, rec.id, k + 1, p.u, p.v, s).unwrap();
                    }
                }
                write_file(&cfg.out.join("polygons").join(format!("{}.txt", f.name)), write_polygons(&records))?;
            }
        }
    }
    write_file(&cfg.out.join("overlay.csv"), overlay)?;
    write_file(&cfg.out.join("summary.json"), summary.to_json())?;
    summary.check()?;
    Ok(summary)
}
