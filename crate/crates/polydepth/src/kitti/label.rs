use std::fmt::Write;

use polydepth_core::eval::{Detection, GroundTruth};
use polydepth_core::Box3D;

use super::{parse_f64, parse_int};
use crate::ParseError;

pub const DONT_CARE: &str = "DontCare";

/// One row of a KITTI label or result file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub class: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// `[left, top, right, bottom]` in pixels.
    pub bbox: [f64; 4],
    /// `[h, w, l]`, the KITTI field order.
    pub dimensions: [f64; 3],
    /// Bottom-face center `[x, y, z]` in camera coordinates.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl LabelRecord {
    pub fn is_dont_care(&self) -> bool {
        self.class == DONT_CARE
    }

    pub fn to_box(&self) -> polydepth_core::Result<Box3D> {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        Box3D::new(x, y, z, l, w, h, self.rotation_y)
    }

    pub fn from_box(class: &str, b: &Box3D, bbox: [f64; 4], score: Option<f64>) -> Self {
        Self {
            class: class.to_string(),
            truncation: 0.0,
            occlusion: 0,
            alpha: polydepth_core::math::normalize_angle(b.theta - b.x.atan2(b.z)),
            bbox,
            dimensions: [b.h, b.w, b.l],
            location: [b.x, b.y, b.z],
            rotation_y: b.theta,
            score,
        }
    }

    /// Evaluation target; `None` for DontCare rows.
    pub fn to_ground_truth(&self, frame: u32, id: u32) -> polydepth_core::Result<Option<GroundTruth>> {
        if self.is_dont_care() {
            return Ok(None);
        }
        Ok(Some(GroundTruth {
            frame,
            id,
            class: self.class.clone(),
            box3d: self.to_box()?,
            bbox2d: self.bbox,
            occlusion: self.occlusion,
            truncation: self.truncation,
        }))
    }

    /// Scored detection. A bbox of all `-1` (unknown) maps to `None`.
    pub fn to_detection(&self, frame: u32, id: u32) -> polydepth_core::Result<Detection> {
        let bbox2d = (self.bbox != [-1.0; 4]).then_some(self.bbox);
        Ok(Detection { frame, id, box3d: self.to_box()?, score: self.score.unwrap_or(0.0), bbox2d })
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<LabelRecord, ParseError> {
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() != 15 && t.len() != 16 {
        return Err(ParseError::new(line_no, format!("expected 15 or 16 fields, found {}", t.len())));
    }
    let f = |i: usize| parse_f64(t[i], line_no, i + 1);
    let occlusion = parse_int(t[2], line_no, 3)?;
    let occlusion = i32::try_from(occlusion)
        .map_err(|_| ParseError::at_field(line_no, 3, "occlusion out of range"))?;
    let rec = LabelRecord {
        class: t[0].to_string(),
        truncation: f(1)?,
        occlusion,
        alpha: f(3)?,
        bbox: [f(4)?, f(5)?, f(6)?, f(7)?],
        dimensions: [f(8)?, f(9)?, f(10)?],
        location: [f(11)?, f(12)?, f(13)?],
        rotation_y: f(14)?,
        score: if t.len() == 16 { Some(f(15)?) } else { None },
    };
    if !rec.is_dont_care() {
        for (j, d) in rec.dimensions.iter().enumerate() {
            if *d <= 0.0 {
                return Err(ParseError::at_field(line_no, 9 + j, format!("dimension must be positive, found {d}")));
            }
        }
    }
    Ok(rec)
}

/// One record per non-blank line, in file order.
pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>, ParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, i + 1))
        .collect()
}

pub fn write_labels(records: &[LabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let [l, t, rr, b] = r.bbox;
        let [h, w, len] = r.dimensions;
        let [x, y, z] = r.location;
        write!(
            out,
            "{} {} {} {} {l} {t} {rr} {b} {h} {w} {len} {x} {y} {z} {}",
            r.class, r.truncation, r.occlusion, r.alpha, r.rotation_y
        )
        .unwrap();
        if let Some(s) = r.score {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
    }
    out
}
