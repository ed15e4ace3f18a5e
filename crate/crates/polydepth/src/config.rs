//! Run configuration: command-line flags, an optional TOML file using the
//! same key names, and the `POLYDEPTH_DATASET_ROOT` environment variable.
//! Precedence is flag, then environment, then file, then built-in default.

use std::path::{Path, PathBuf};

use polydepth_core::bev::{BevSpec, ResidualNoise, RoiSpec};
use polydepth_core::depth::{DepthConfig, FocalAxis, HeightPrior};
use polydepth_core::eval::{ApOptions, Interpolation};
use serde::Deserialize;

use crate::pipeline::{HeightSource, PolygonSource, RefineSource, StageOptions};
use crate::{Error, Result};

pub const DATASET_ROOT_ENV: &str = "POLYDEPTH_DATASET_ROOT";

/// Every setting, all optional so that sources can be layered.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// KITTI-layout dataset directory (calib/, label_2/, depth/).
    #[arg(long, env = DATASET_ROOT_ENV)]
    pub dataset_root: Option<PathBuf>,
    /// File listing the frame ids to process, one per line.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    /// oracle | file:DIR | heatmap:DIR
    #[arg(long)]
    pub polygon_source: Option<String>,
    /// prior | oracle | file:DIR
    #[arg(long)]
    pub height_source: Option<String>,
    /// Gaussian noise on oracle polygon vertices, pixels.
    #[arg(long)]
    pub sigma_px: Option<f64>,
    /// Log-normal noise on oracle heights (sd of ln H).
    #[arg(long)]
    pub sigma_height: Option<f64>,
    /// off | oracle | file:DIR
    #[arg(long)]
    pub refine: Option<String>,
    /// Oracle residual noise as POSITION,SIZE,ANGLE.
    #[arg(long, value_delimiter = ',')]
    pub residual_noise: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Label class to recover and evaluate.
    #[arg(long)]
    pub class: Option<String>,
    /// Height prior A_H, meters.
    #[arg(long)]
    pub mean_height: Option<f64>,
    #[arg(long)]
    pub min_edge_px: Option<f64>,
    /// fx | fy
    #[arg(long)]
    pub focal: Option<String>,
    #[arg(long)]
    pub bev_resolution: Option<f64>,
    #[arg(long)]
    pub bev_slices: Option<usize>,
    #[arg(long)]
    pub roi_width: Option<usize>,
    #[arg(long)]
    pub roi_height: Option<usize>,
    #[arg(long)]
    pub roi_scale: Option<f64>,
    /// 11 | 40 recall points.
    #[arg(long)]
    pub interpolation: Option<u32>,
    /// Directory of KITTI result files.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Synthetic frame count.
    #[arg(long)]
    pub frames: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub sigma_px_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sigma_height_list: Option<Vec<f64>>,
    /// Replicas per benchmark cell.
    #[arg(long)]
    pub ensemble: Option<u32>,
    /// Also render histograms as SVG.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
    /// Skip depth maps (synth output, benchmark rasterization).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_depth: Option<bool>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields of `self` win; gaps are filled from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        layer!(self, lower, dataset_root, split_file, polygon_source, height_source, sigma_px, sigma_height,
            refine, residual_noise, seed, out, jobs, class, mean_height, min_edge_px, focal, bev_resolution,
            bev_slices, roi_width, roi_height, roi_scale, interpolation, predictions, frames, sigma_px_list,
            sigma_height_list, ensemble, svg, no_depth)
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_root: Option<PathBuf>,
    pub split_file: Option<PathBuf>,
    pub stages: StageOptions,
    /// `None` only when nothing random is requested.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    pub bev: BevSpec,
    pub ap: ApOptions,
    pub predictions: Option<PathBuf>,
    pub frames: u32,
    pub sigma_px_list: Vec<f64>,
    pub sigma_height_list: Vec<f64>,
    pub ensemble: u32,
    pub svg: bool,
    pub depth_maps: bool,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn existing_dir(p: PathBuf, what: &str) -> Result<PathBuf> {
    if p.is_dir() {
        Ok(p)
    } else {
        Err(bad(format!("{what} {} is not a directory", p.display())))
    }
}

fn source_path(rest: &str, flag: &str) -> Result<PathBuf> {
    if rest.is_empty() {
        return Err(bad(format!("--{flag}: empty path")));
    }
    existing_dir(PathBuf::from(rest), &format!("--{flag}"))
}

fn sigma(v: Option<f64>, name: &str) -> Result<f64> {
    let s = v.unwrap_or(0.0);
    if s.is_finite() && s >= 0.0 {
        Ok(s)
    } else {
        Err(bad(format!("--{name} must be finite and non-negative, got {s}")))
    }
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(format!("--{name} must be positive, got {v}")))
    }
}

pub fn parse_polygon_source(s: &str) -> Result<PolygonSource> {
    match s.split_once(':') {
        None if s == "oracle" => Ok(PolygonSource::Oracle),
        Some(("file", p)) => Ok(PolygonSource::File(source_path(p, "polygon-source")?)),
        Some(("heatmap", p)) => Ok(PolygonSource::Heatmap(source_path(p, "polygon-source")?)),
        _ => Err(bad(format!("--polygon-source: expected oracle, file:DIR or heatmap:DIR, got {s:?}"))),
    }
}

pub fn parse_height_source(s: &str) -> Result<HeightSource> {
    match s.split_once(':') {
        None if s == "prior" => Ok(HeightSource::Prior),
        None if s == "oracle" => Ok(HeightSource::Oracle),
        Some(("file", p)) => Ok(HeightSource::File(source_path(p, "height-source")?)),
        _ => Err(bad(format!("--height-source: expected prior, oracle or file:DIR, got {s:?}"))),
    }
}

pub fn parse_refine(s: &str) -> Result<RefineSource> {
    match s.split_once(':') {
        None if s == "off" => Ok(RefineSource::Off),
        None if s == "oracle" => Ok(RefineSource::Oracle),
        Some(("file", p)) => Ok(RefineSource::File(source_path(p, "refine")?)),
        _ => Err(bad(format!("--refine: expected off, oracle or file:DIR, got {s:?}"))),
    }
}

impl RunConfig {
    /// Layers the sources and validates values and input paths. `cli` should
    /// already carry the environment value for the dataset root.
    pub fn resolve(cli: Settings, file: Option<Settings>) -> Result<RunConfig> {
        let s = cli.over(file.unwrap_or_default());
        let dataset_root = s.dataset_root.map(|p| existing_dir(p, "--dataset-root")).transpose()?;
        let split_file = match s.split_file {
            Some(p) if !p.is_file() => return Err(bad(format!("--split-file {} is not a file", p.display()))),
            other => other,
        };
        let predictions = s.predictions.map(|p| existing_dir(p, "--predictions")).transpose()?;

        let residual_noise = match s.residual_noise.as_deref() {
            None => ResidualNoise::default(),
            Some(&[position, size, angle]) => {
                for v in [position, size, angle] {
                    sigma(Some(v), "residual-noise")?;
                }
                ResidualNoise { position, size, angle }
            }
            Some(_) => return Err(bad("--residual-noise takes POSITION,SIZE,ANGLE")),
        };
        let prior = HeightPrior::new(positive(s.mean_height.unwrap_or(polydepth_core::depth::CAR_MEAN_HEIGHT), "mean-height")?)
            .map_err(|e| bad(e.to_string()))?;
        let focal = match s.focal.as_deref() {
            None | Some("fx") => FocalAxis::Fx,
            Some("fy") => FocalAxis::Fy,
            Some(o) => return Err(bad(format!("--focal: expected fx or fy, got {o:?}"))),
        };
        let min_edge_px = positive(s.min_edge_px.unwrap_or(polydepth_core::depth::DEFAULT_MIN_EDGE_PX), "min-edge-px")?;
        let class = s.class.unwrap_or_else(|| "Car".into());
        let roi_default = RoiSpec::default();
        let roi = RoiSpec {
            width: s.roi_width.unwrap_or(roi_default.width),
            height: s.roi_height.unwrap_or(roi_default.height),
            scale: positive(s.roi_scale.unwrap_or(roi_default.scale), "roi-scale")?,
        };
        if roi.width == 0 || roi.height == 0 {
            return Err(bad("ROI size must be positive"));
        }
        let bev_default = BevSpec::default();
        let bev = BevSpec {
            resolution: positive(s.bev_resolution.unwrap_or(bev_default.resolution), "bev-resolution")?,
            n_slices: s.bev_slices.unwrap_or(bev_default.n_slices),
            ..bev_default
        };
        bev.validate().map_err(|e| bad(format!("BEV grid: {e}")))?;
        let interpolation = match s.interpolation {
            None | Some(11) => Interpolation::ElevenPoint,
            Some(40) => Interpolation::FortyPoint,
            Some(n) => return Err(bad(format!("--interpolation: expected 11 or 40, got {n}"))),
        };
        let ap = ApOptions { interpolation, target_class: class.clone(), ..ApOptions::default() };

        let stages = StageOptions {
            polygon: parse_polygon_source(s.polygon_source.as_deref().unwrap_or("oracle"))?,
            height: parse_height_source(s.height_source.as_deref().unwrap_or("oracle"))?,
            refine: parse_refine(s.refine.as_deref().unwrap_or("off"))?,
            sigma_px: sigma(s.sigma_px, "sigma-px")?,
            sigma_height: sigma(s.sigma_height, "sigma-height")?,
            residual_noise,
            prior,
            depth: DepthConfig { min_edge_px, focal },
            class,
            roi,
            seed: s.seed.unwrap_or(0),
            replica: 0,
        };
        let list = |v: Option<Vec<f64>>, default: Vec<f64>, name: &str| -> Result<Vec<f64>> {
            let v = v.unwrap_or(default);
            if v.is_empty() {
                return Err(bad(format!("--{name} is empty")));
            }
            v.into_iter().map(|x| sigma(Some(x), name)).collect()
        };
        let cfg = RunConfig {
            dataset_root,
            split_file,
            seed: s.seed,
            out: s.out.unwrap_or_else(|| PathBuf::from("out")),
            jobs: match s.jobs {
                Some(0) => return Err(bad("--jobs must be at least 1")),
                Some(n) => n,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
            bev,
            ap,
            predictions,
            frames: s.frames.unwrap_or(200),
            sigma_px_list: list(s.sigma_px_list, vec![0.0, 0.5, 1.0, 2.0], "sigma-px-list")?,
            sigma_height_list: list(s.sigma_height_list, vec![0.0, 0.05], "sigma-height-list")?,
            ensemble: match s.ensemble.unwrap_or(1) {
                0 => return Err(bad("--ensemble must be at least 1")),
                n => n,
            },
            svg: s.svg.unwrap_or(false),
            depth_maps: !s.no_depth.unwrap_or(false),
            stages,
        };
        Ok(cfg)
    }

    /// Whether the per-frame pipeline draws random numbers.
    pub fn pipeline_is_stochastic(&self) -> bool {
        let st = &self.stages;
        (st.polygon == PolygonSource::Oracle && st.sigma_px > 0.0)
            || (st.height == HeightSource::Oracle && st.sigma_height > 0.0)
            || (st.refine == RefineSource::Oracle && !st.residual_noise.is_zero())
    }

    /// The seed, which must have been given explicitly when `needed`.
    pub fn seed_for(&self, needed: bool, what: &str) -> Result<u64> {
        match (self.seed, needed) {
            (Some(s), _) => Ok(s),
            (None, false) => Ok(0),
            (None, true) => Err(bad(format!("{what} is stochastic and needs --seed"))),
        }
    }

    pub fn dataset(&self) -> Result<crate::dataset::Dataset> {
        let root = self
            .dataset_root
            .as_ref()
            .ok_or_else(|| bad(format!("--dataset-root (or {DATASET_ROOT_ENV}) is required")))?;
        crate::dataset::Dataset::open(root)
    }
}
