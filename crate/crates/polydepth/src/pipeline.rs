//! Per-frame pipeline: structured polygon, object height, coarse box and
//! optional refinement, each stage fed by an oracle or by a sidecar file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use polydepth_core::bev::{apply_residuals, extract_3d_roi, oracle_residuals, BevGrid, BoxResiduals, ResidualNoise, RoiSpec};
use polydepth_core::depth::{decode_height, oracle_height, recover_coarse_box, CoarseRecovery, DepthConfig, HeightPrior};
use polydepth_core::eval::Detection;
use polydepth_core::heatmap::{oracle_polygon, PolygonEstimate};
use polydepth_core::{Box3D, CameraIntrinsics};

use crate::kitti::LabelRecord;
use crate::rng::{stage_rng, Stage};
use crate::sidecar::PolygonRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolygonSource {
    Oracle,
    /// Directory of `<frame>.txt` polygon sidecars.
    File(PathBuf),
    /// Directory of `<frame>/<object>.hdr` + `.bin` heatmaps.
    Heatmap(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeightSource {
    Prior,
    Oracle,
    /// Directory of `<frame>.txt` height sidecars.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefineSource {
    Off,
    Oracle,
    /// Directory of `<frame>.txt` residual sidecars.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOptions {
    pub polygon: PolygonSource,
    pub height: HeightSource,
    pub refine: RefineSource,
    pub sigma_px: f64,
    pub sigma_height: f64,
    pub residual_noise: ResidualNoise,
    pub prior: HeightPrior,
    pub depth: DepthConfig,
    /// Label class the oracles recover.
    pub class: String,
    pub roi: RoiSpec,
    pub seed: u64,
    pub replica: u32,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self {
            polygon: PolygonSource::Oracle,
            height: HeightSource::Oracle,
            refine: RefineSource::Off,
            sigma_px: 0.0,
            sigma_height: 0.0,
            residual_noise: ResidualNoise::default(),
            prior: HeightPrior::default(),
            depth: DepthConfig::default(),
            class: "Car".into(),
            roi: RoiSpec::default(),
            seed: 0,
            replica: 0,
        }
    }
}

/// Everything one frame needs; sidecar maps are keyed by object id, which is
/// the row index in the frame's label file.
#[derive(Debug, Clone, Default)]
pub struct FrameInputs {
    pub frame: u32,
    pub camera: Option<CameraIntrinsics>,
    pub labels: Option<Vec<LabelRecord>>,
    pub polygons: Option<Vec<PolygonRecord>>,
    pub heights: Option<BTreeMap<u32, f64>>,
    pub residuals: Option<BTreeMap<u32, BoxResiduals>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SkipReason {
    DegenerateEdge,
    BehindCamera,
    MissingLabel,
    MissingHeight,
    MissingResidual,
    InvalidBox,
}

impl SkipReason {
    pub fn name(self) -> &'static str {
        match self {
            SkipReason::DegenerateEdge => "degenerate_edge",
            SkipReason::BehindCamera => "behind_camera",
            SkipReason::MissingLabel => "missing_label",
            SkipReason::MissingHeight => "missing_height",
            SkipReason::MissingResidual => "missing_residual",
            SkipReason::InvalidBox => "invalid_box",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skip {
    pub id: u32,
    pub reason: SkipReason,
    pub detail: String,
}

impl fmt::Display for Skip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "object {}: {} ({})", self.id, self.reason.name(), self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectResult {
    pub id: u32,
    pub estimate: PolygonEstimate,
    pub height: f64,
    pub coarse: CoarseRecovery,
    pub refined: Option<Box3D>,
    /// Occupied fraction of the 3D-ROI, when a BEV grid was available.
    pub roi_occupancy: Option<f64>,
    pub ground_truth: Option<Box3D>,
}

impl ObjectResult {
    fn detection(&self, frame: u32, box3d: Box3D) -> Detection {
        Detection {
            frame,
            id: self.id,
            box3d,
            score: self.estimate.mean_score(),
            bbox2d: Some(self.estimate.polygon.bounding_rect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameOutcome {
    pub frame: u32,
    pub objects: Vec<ObjectResult>,
    pub skipped: Vec<Skip>,
}

impl FrameOutcome {
    pub fn coarse_detections(&self) -> Vec<Detection> {
        self.objects.iter().map(|o| o.detection(self.frame, o.coarse.box3d)).collect()
    }

    /// Refined boxes where present, coarse boxes otherwise.
    pub fn final_detections(&self) -> Vec<Detection> {
        self.objects
            .iter()
            .map(|o| o.detection(self.frame, o.refined.unwrap_or(o.coarse.box3d)))
            .collect()
    }
}

struct Target {
    id: u32,
    given: Option<PolygonEstimate>,
    gt: Option<Result<Box3D, String>>,
}

fn targets(inp: &FrameInputs, opts: &StageOptions) -> Vec<Target> {
    let label_box = |id: u32| -> Option<Result<Box3D, String>> {
        let l = inp.labels.as_ref()?.get(id as usize)?;
        (l.class == opts.class).then(|| l.to_box().map_err(|e| e.to_string()))
    };
    match (&opts.polygon, &inp.polygons) {
        (PolygonSource::Oracle, _) => inp
            .labels
            .iter()
            .flatten()
            .enumerate()
            .filter(|(_, l)| l.class == opts.class)
            .map(|(i, _)| Target { id: i as u32, given: None, gt: label_box(i as u32) })
            .collect(),
        (_, Some(polys)) => polys
            .iter()
            .map(|p| Target { id: p.id, given: Some(p.estimate), gt: label_box(p.id) })
            .collect(),
        (_, None) => Vec::new(),
    }
}

fn classify(e: &polydepth_core::Error) -> SkipReason {
    use polydepth_core::Error as E;
    match e {
        E::DegenerateEdge { .. } | E::EdgeTooShort { .. } => SkipReason::DegenerateEdge,
        E::NonPositiveDepth { .. } | E::VertexBehindCamera { .. } => SkipReason::BehindCamera,
        _ => SkipReason::InvalidBox,
    }
}

/// Runs every target object of a frame. Random draws come from per-stage
/// streams keyed by (seed, frame, stage, replica) and are consumed in object
/// order, so the outcome is a pure function of the inputs.
pub fn process_frame(inp: &FrameInputs, bev: Option<&BevGrid>, opts: &StageOptions) -> FrameOutcome {
    let mut out = FrameOutcome { frame: inp.frame, ..Default::default() };
    let Some(k) = inp.camera else { return out };
    let mut poly_rng = stage_rng(opts.seed, inp.frame, Stage::Polygon, opts.replica);
    let mut height_rng = stage_rng(opts.seed, inp.frame, Stage::Height, opts.replica);
    let mut res_rng = stage_rng(opts.seed, inp.frame, Stage::Residual, opts.replica);

    for t in targets(inp, opts) {
        let skip = |reason, detail: String| Skip { id: t.id, reason, detail };
        let gt = match &t.gt {
            Some(Ok(b)) => Some(*b),
            Some(Err(e)) => {
                out.skipped.push(skip(SkipReason::InvalidBox, e.clone()));
                continue;
            }
            None => None,
        };
        let need_gt = |what: &str| skip(SkipReason::MissingLabel, format!("{what} oracle needs a {} label", opts.class));

        let estimate = match (t.given, gt) {
            (Some(e), _) => e,
            (None, Some(g)) => match oracle_polygon(&k, &g, opts.sigma_px, &mut poly_rng) {
                Ok(e) => e,
                Err(e) => {
                    out.skipped.push(skip(classify(&e), e.to_string()));
                    continue;
                }
            },
            (None, None) => {
                out.skipped.push(need_gt("polygon"));
                continue;
            }
        };

        let height = match (&opts.height, gt) {
            (HeightSource::Prior, _) => opts.prior.mean_height(),
            (HeightSource::Oracle, Some(g)) => match oracle_height(g.h, opts.sigma_height, &mut height_rng) {
                Ok(h) => h,
                Err(e) => {
                    out.skipped.push(skip(SkipReason::InvalidBox, e.to_string()));
                    continue;
                }
            },
            (HeightSource::Oracle, None) => {
                out.skipped.push(need_gt("height"));
                continue;
            }
            (HeightSource::File(_), _) => match inp.heights.as_ref().and_then(|m| m.get(&t.id)) {
                Some(t_h) => decode_height(*t_h, &opts.prior),
                None => {
                    out.skipped.push(skip(SkipReason::MissingHeight, "no t_H record".into()));
                    continue;
                }
            },
        };

        let coarse = match recover_coarse_box(&k, &estimate.polygon, height, &opts.depth) {
            Ok(c) => c,
            Err(e) => {
                out.skipped.push(skip(classify(&e), e.to_string()));
                continue;
            }
        };

        let residuals = match (&opts.refine, gt) {
            (RefineSource::Off, _) => None,
            (RefineSource::Oracle, Some(g)) => {
                Some(oracle_residuals(&coarse.box3d, &g, &opts.residual_noise, &mut res_rng))
            }
            (RefineSource::Oracle, None) => {
                out.skipped.push(need_gt("residual"));
                continue;
            }
            (RefineSource::File(_), _) => match inp.residuals.as_ref().and_then(|m| m.get(&t.id)) {
                Some(r) => Some(*r),
                None => {
                    out.skipped.push(skip(SkipReason::MissingResidual, "no residual record".into()));
                    continue;
                }
            },
        };
        let refined = match residuals.map(|r| apply_residuals(&coarse.box3d, &r)).transpose() {
            Ok(r) => r,
            Err(e) => {
                out.skipped.push(skip(SkipReason::InvalidBox, e.to_string()));
                continue;
            }
        };
        let roi_occupancy = bev
            .filter(|_| opts.refine != RefineSource::Off)
            .and_then(|g| extract_3d_roi(g, &coarse.box3d, &opts.roi).ok())
            .map(|roi| roi.occupancy(roi.channels - 1));

        out.objects.push(ObjectResult { id: t.id, estimate, height, coarse, refined, roi_occupancy, ground_truth: gt });
    }
    out
}

/// The polygon stage alone: what [`process_frame`] would feed to recovery,
/// drawn from the same stream in the same order.
pub fn project_frame(inp: &FrameInputs, opts: &StageOptions) -> (Vec<PolygonRecord>, Vec<Skip>) {
    let (mut records, mut skipped) = (Vec::new(), Vec::new());
    let Some(k) = inp.camera else { return (records, skipped) };
    let mut rng = stage_rng(opts.seed, inp.frame, Stage::Polygon, opts.replica);
    for t in targets(inp, opts) {
        let skip = |reason, detail: String| Skip { id: t.id, reason, detail };
        match (t.given, &t.gt) {
            (Some(estimate), _) => records.push(PolygonRecord { id: t.id, estimate }),
            (None, Some(Ok(g))) => match oracle_polygon(&k, g, opts.sigma_px, &mut rng) {
                Ok(estimate) => records.push(PolygonRecord { id: t.id, estimate }),
                Err(e) => skipped.push(skip(classify(&e), e.to_string())),
            },
            (None, Some(Err(e))) => skipped.push(skip(SkipReason::InvalidBox, e.clone())),
            (None, None) => skipped.push(skip(SkipReason::MissingLabel, "no label".into())),
        }
    }
    (records, skipped)
}
