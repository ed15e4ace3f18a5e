use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{average_precision, iou_3d, match_greedy, rotated_iou_bev, ApOptions, Detection, Difficulty, GroundTruth};
use crate::{Error, Result};

pub const IOU_THRESHOLDS: [f64; 2] = [0.5, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IouKind {
    Bev,
    ThreeD,
}

impl IouKind {
    pub fn name(self) -> &'static str {
        match self {
            IouKind::Bev => "AP_BEV",
            IouKind::ThreeD => "AP_3D",
        }
    }

    pub fn iou(self) -> fn(&crate::Box3D, &crate::Box3D) -> f64 {
        match self {
            IouKind::Bev => rotated_iou_bev,
            IouKind::ThreeD => iou_3d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApEntry {
    pub metric: IouKind,
    pub threshold: f64,
    pub difficulty: Difficulty,
    /// `None` when the regime has no ground truth.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Ordered by metric, then threshold, then difficulty.
    pub entries: Vec<ApEntry>,
    pub mean_depth_error: Option<f64>,
    pub matched: usize,
    pub n_targets: usize,
    pub n_detections: usize,
}

impl EvalReport {
    pub fn get(&self, metric: IouKind, threshold: f64, difficulty: Difficulty) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.metric == metric && e.threshold == threshold && e.difficulty == difficulty)
            .and_then(|e| e.ap)
    }
}

/// AP_BEV and AP_3D at IoU 0.5 and 0.7 for every regime, plus the mean depth
/// error over detections matched one-to-one (by BEV overlap, per frame) to
/// target-class ground truth.
pub fn evaluate(dets: &[Detection], gts: &[GroundTruth], opts: &ApOptions) -> Result<EvalReport> {
    let n_targets = gts.iter().filter(|g| g.class == opts.target_class).count();
    if n_targets == 0 {
        return Err(Error::UndefinedMetric("no ground truth of the target class"));
    }
    let mut entries = Vec::new();
    for metric in [IouKind::Bev, IouKind::ThreeD] {
        for threshold in IOU_THRESHOLDS {
            for difficulty in Difficulty::REGIMES {
                let ap = match average_precision(dets, gts, metric.iou(), threshold, difficulty, opts) {
                    Ok(v) => Some(v),
                    Err(Error::UndefinedMetric(_)) => None,
                    Err(e) => return Err(e),
                };
                entries.push(ApEntry { metric, threshold, difficulty, ap });
            }
        }
    }

    let mut by_frame: BTreeMap<u32, (Vec<crate::Box3D>, Vec<crate::Box3D>)> = BTreeMap::new();
    for d in dets {
        by_frame.entry(d.frame).or_default().0.push(d.box3d);
    }
    for g in gts.iter().filter(|g| g.class == opts.target_class) {
        by_frame.entry(g.frame).or_default().1.push(g.box3d);
    }
    let (mut sum, mut matched) = (0.0, 0usize);
    for (preds, targets) in by_frame.values() {
        for (pi, gi) in match_greedy(preds, targets, rotated_iou_bev, 0.0) {
            sum += (preds[pi].z - targets[gi].z).abs();
            matched += 1;
        }
    }
    let mean_depth_error = (matched > 0).then(|| sum / matched as f64);

    Ok(EvalReport { entries, mean_depth_error, matched, n_targets, n_detections: dets.len() })
}
