//! Detection metrics: rotated IoU, KITTI difficulty regimes, interpolated
//! average precision and mean depth error.

mod ap;
mod iou;
mod report;

use alloc::string::String;

use crate::geometry::Box3D;

pub use ap::{average_precision, match_greedy, mean_depth_error, precision_recall, ApOptions, Interpolation, PrCurve};
pub use iou::{bev_intersection_area, clip_convex, iou_3d, rotated_iou_bev, signed_area, vertical_overlap};
pub use report::{evaluate, ApEntry, EvalReport, IouKind, IOU_THRESHOLDS};

/// A scored prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    /// Index within the frame, used for stable ordering.
    pub id: u32,
    pub box3d: Box3D,
    pub score: f64,
    /// `[u1, v1, u2, v2]`; when present, detections too small for a regime
    /// are ignored there, as in the KITTI devkit.
    pub bbox2d: Option<[f64; 4]>,
}

/// An annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frame: u32,
    pub id: u32,
    pub class: String,
    pub box3d: Box3D,
    pub bbox2d: [f64; 4],
    /// 0 fully visible .. 3 unknown.
    pub occlusion: i32,
    pub truncation: f64,
}

impl GroundTruth {
    pub fn bbox_height(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }
}

/// KITTI difficulty. Regimes are cumulative: `Hard` also contains every
/// `Moderate` and `Easy` object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    Ignored,
}

impl Difficulty {
    pub const REGIMES: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
            Difficulty::Ignored => "ignored",
        }
    }

    /// `(min 2D height px, max occlusion, max truncation)` of a regime.
    pub fn thresholds(self) -> Option<(f64, i32, f64)> {
        match self {
            Difficulty::Easy => Some((40.0, 0, 0.15)),
            Difficulty::Moderate => Some((25.0, 1, 0.30)),
            Difficulty::Hard => Some((25.0, 2, 0.50)),
            Difficulty::Ignored => None,
        }
    }

    /// Whether an object of difficulty `self` counts in `regime`.
    pub fn within(self, regime: Difficulty) -> bool {
        self != Difficulty::Ignored && self <= regime
    }
}

/// Easiest regime whose thresholds the object meets.
pub fn difficulty_of(g: &GroundTruth) -> Difficulty {
    let height = g.bbox_height();
    for regime in Difficulty::REGIMES {
        let (min_h, max_occ, max_trunc) = regime.thresholds().unwrap();
        if height >= min_h && g.occlusion >= 0 && g.occlusion <= max_occ && g.truncation <= max_trunc {
            return regime;
        }
    }
    Difficulty::Ignored
}
