use crate::config::RunConfig;
use crate::synth::{write_dataset, SceneConfig};
use crate::Result;

/// Writes a synthetic dataset of `--frames` frames to `--out`.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let seed = cfg.seed_for(true, "scene generation")?;
    write_dataset(&SceneConfig::kitti(seed), cfg.frames, &cfg.out, cfg.depth_maps)
}
