use polydepth_core::eval::Detection;

use super::label::{parse_labels, write_labels, LabelRecord};
use crate::ParseError;

/// KITTI result row for a detection: truncation and occlusion are `-1`,
/// an unknown 2D box is written as four `-1`.
pub fn detection_record(d: &Detection, class: &str) -> LabelRecord {
    let mut r = LabelRecord::from_box(class, &d.box3d, d.bbox2d.unwrap_or([-1.0; 4]), Some(d.score));
    r.truncation = -1.0;
    r.occlusion = -1;
    r
}

/// Detections sorted by descending score, then id.
pub fn write_predictions(dets: &[Detection], class: &str) -> String {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    let records: Vec<LabelRecord> = order.iter().map(|d| detection_record(d, class)).collect();
    write_labels(&records)
}

/// Detections of one frame, with ids taken from row order. Every row must
/// carry a score; rows of other classes are kept too, the caller filters.
pub fn parse_predictions(text: &str, frame: u32) -> Result<Vec<(String, Detection)>, ParseError> {
    let records = parse_labels(text)?;
    let mut line_numbers = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1);
    let mut out = Vec::with_capacity(records.len());
    for (id, r) in records.iter().enumerate() {
        let line = line_numbers.next().unwrap_or(0);
        if r.score.is_none() {
            return Err(ParseError::new(line, "result rows need a score (16 fields)"));
        }
        if r.is_dont_care() {
            continue;
        }
        let d = r
            .to_detection(frame, id as u32)
            .map_err(|e| ParseError::new(line, e.to_string()))?;
        out.push((r.class.clone(), d));
    }
    Ok(out)
}
