use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{difficulty_of, Detection, Difficulty, GroundTruth};
use crate::geometry::Box3D;
use crate::{Error, Result};

/// Recall sampling used to integrate the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Recall in {0, 0.1, ..., 1}.
    #[default]
    ElevenPoint,
    /// Recall in {1/40, 2/40, ..., 1}.
    FortyPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApOptions {
    pub interpolation: Interpolation,
    /// Ground truth of this class are the targets.
    pub target_class: String,
    /// Ground truth of these classes neither count as misses nor turn
    /// matching detections into false positives.
    pub neighbor_classes: Vec<String>,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::ElevenPoint,
            target_class: "Car".into(),
            neighbor_classes: vec!["Van".into()],
        }
    }
}

/// Cumulative true/false positives after each ranked detection.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub n_gt: usize,
    /// `(true positives, false positives)` after each counted detection.
    pub cumulative: Vec<(usize, usize)>,
}

impl PrCurve {
    pub fn precision_recall(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cumulative
            .iter()
            .map(move |&(tp, fp)| (tp as f64 / (tp + fp) as f64, tp as f64 / self.n_gt as f64))
    }

    /// Mean over the sampled recall levels of the best precision reached at
    /// or beyond each level. Levels are compared in integer arithmetic.
    pub fn interpolated_ap(&self, interpolation: Interpolation) -> f64 {
        let (levels, denom): (Vec<usize>, usize) = match interpolation {
            Interpolation::ElevenPoint => ((0..=10).collect(), 10),
            Interpolation::FortyPoint => ((1..=40).collect(), 40),
        };
        let sum: f64 = levels
            .iter()
            .map(|&k| {
                self.cumulative
                    .iter()
                    .filter(|&&(tp, _)| tp * denom >= k * self.n_gt)
                    .map(|&(tp, fp)| tp as f64 / (tp + fp) as f64)
                    .fold(0.0, f64::max)
            })
            .sum();
        sum / levels.len() as f64
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GtRole {
    Target,
    Ignored,
}

fn gt_role(g: &GroundTruth, regime: Difficulty, opts: &ApOptions) -> Option<GtRole> {
    if g.class == opts.target_class {
        if difficulty_of(g).within(regime) {
            Some(GtRole::Target)
        } else {
            Some(GtRole::Ignored)
        }
    } else if opts.neighbor_classes.contains(&g.class) {
        Some(GtRole::Ignored)
    } else {
        None
    }
}

fn score_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.frame.cmp(&b.frame))
        .then(a.id.cmp(&b.id))
}

/// Matches detections to ground truth frame by frame and ranks the outcome.
///
/// Within a frame, detections are visited by descending score; each takes
/// the unmatched target with the highest IoU at or above `threshold`. A
/// detection that finds no target but overlaps an ignored object (a harder
/// target, or a neighbor class) is dropped; otherwise it is a false positive.
pub fn precision_recall<F>(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou: F,
    threshold: f64,
    regime: Difficulty,
    opts: &ApOptions,
) -> Result<PrCurve>
where
    F: Fn(&Box3D, &Box3D) -> f64,
{
    let min_height = regime
        .thresholds()
        .ok_or(Error::UndefinedMetric("the ignored class is not a regime"))?
        .0;
    let mut frames: BTreeMap<u32, (Vec<(&GroundTruth, GtRole)>, Vec<&Detection>)> = BTreeMap::new();
    let mut n_gt = 0;
    for g in gts {
        if let Some(role) = gt_role(g, regime, opts) {
            if role == GtRole::Target {
                n_gt += 1;
            }
            frames.entry(g.frame).or_default().0.push((g, role));
        }
    }
    if n_gt == 0 {
        return Err(Error::UndefinedMetric("no ground truth in this regime"));
    }
    for d in dets {
        if !d.score.is_finite() {
            continue;
        }
        if let Some(b) = d.bbox2d {
            if b[3] - b[1] < min_height {
                continue;
            }
        }
        frames.entry(d.frame).or_default().1.push(d);
    }

    let mut outcomes: Vec<(&Detection, bool)> = Vec::new();
    for (frame_gts, mut frame_dets) in frames.into_values() {
        frame_dets.sort_by(|a, b| score_order(a, b));
        let mut taken = vec![false; frame_gts.len()];
        for d in frame_dets {
            let mut best: Option<(usize, f64)> = None;
            let mut hits_ignored = false;
            for (gi, (g, role)) in frame_gts.iter().enumerate() {
                let o = iou(&d.box3d, &g.box3d);
                if o < threshold {
                    continue;
                }
                match role {
                    GtRole::Target if !taken[gi] => {
                        if best.is_none_or(|(_, bo)| o > bo) {
                            best = Some((gi, o));
                        }
                    }
                    GtRole::Ignored => hits_ignored = true,
                    GtRole::Target => {}
                }
            }
            match best {
                Some((gi, _)) => {
                    taken[gi] = true;
                    outcomes.push((d, true));
                }
                None if hits_ignored => {}
                None => outcomes.push((d, false)),
            }
        }
    }

    outcomes.sort_by(|a, b| score_order(a.0, b.0));
    let mut cumulative = Vec::with_capacity(outcomes.len());
    let (mut tp, mut fp) = (0, 0);
    for (_, is_tp) in outcomes {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        cumulative.push((tp, fp));
    }
    Ok(PrCurve { n_gt, cumulative })
}

/// Interpolated average precision for one IoU function, threshold and regime.
pub fn average_precision<F>(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou: F,
    threshold: f64,
    regime: Difficulty,
    opts: &ApOptions,
) -> Result<f64>
where
    F: Fn(&Box3D, &Box3D) -> f64,
{
    Ok(precision_recall(dets, gts, iou, threshold, regime, opts)?.interpolated_ap(opts.interpolation))
}

/// One-to-one matching taking pairs in order of decreasing IoU; pairs below
/// `min_iou` (or with zero overlap) are never matched. Returns
/// `(prediction index, ground-truth index)`.
pub fn match_greedy<F>(preds: &[Box3D], gts: &[Box3D], iou: F, min_iou: f64) -> Vec<(usize, usize)>
where
    F: Fn(&Box3D, &Box3D) -> f64,
{
    let mut pairs = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            let o = iou(p, g);
            if o > 0.0 && o >= min_iou {
                pairs.push((o, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gts.len()];
    let mut out = Vec::new();
    for (_, pi, gi) in pairs {
        if !used_p[pi] && !used_g[gi] {
            used_p[pi] = true;
            used_g[gi] = true;
            out.push((pi, gi));
        }
    }
    out.sort_by_key(|&(_, gi)| gi);
    out
}

/// Mean of `|z_pred - z_gt|` over matched `(prediction, ground truth)` pairs.
pub fn mean_depth_error(preds: &[Box3D], gts: &[Box3D], matching: &[(usize, usize)]) -> Result<f64> {
    if matching.is_empty() {
        return Err(Error::UndefinedMetric("no matched pairs"));
    }
    let mut sum = 0.0;
    for &(pi, gi) in matching {
        let (p, g) = match (preds.get(pi), gts.get(gi)) {
            (Some(p), Some(g)) => (p, g),
            _ => return Err(Error::ShapeMismatch("matching index out of range")),
        };
        sum += (p.z - g.z).abs();
    }
    Ok(sum / matching.len() as f64)
}
