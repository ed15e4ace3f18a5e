//! Text and JSON renderings of an evaluation report.

use std::fmt::Write;

use polydepth_core::eval::{Difficulty, EvalReport, IouKind};
use serde::Serialize;

/// Column groups in table order: IoU 0.5 BEV, 3D, then IoU 0.7 BEV, 3D.
pub const COLUMN_GROUPS: [(f64, IouKind); 4] =
    [(0.5, IouKind::Bev), (0.5, IouKind::ThreeD), (0.7, IouKind::Bev), (0.7, IouKind::ThreeD)];

#[derive(Debug, Serialize)]
struct EntryJson {
    metric: &'static str,
    iou: f64,
    difficulty: &'static str,
    ap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ReportJson {
    entries: Vec<EntryJson>,
    mean_depth_error: Option<f64>,
    matched: usize,
    targets: usize,
    detections: usize,
}

pub fn report_json(r: &EvalReport) -> String {
    let j = ReportJson {
        entries: r
            .entries
            .iter()
            .map(|e| EntryJson { metric: e.metric.name(), iou: e.threshold, difficulty: e.difficulty.name(), ap: e.ap })
            .collect(),
        mean_depth_error: r.mean_depth_error,
        matched: r.matched,
        targets: r.n_targets,
        detections: r.n_detections,
    };
    let mut s = serde_json::to_string_pretty(&j).expect("plain data serializes");
    s.push('\n');
    s
}

/// AP in percent, one row, grouped like the usual KITTI validation table.
pub fn report_table(r: &EvalReport, method: &str) -> String {
    let width = method.len().max(6);
    let mut s = String::new();
    write!(s, "{:width$} ", "").unwrap();
    for (iou, kind) in COLUMN_GROUPS {
        write!(s, "| {:^23} ", format!("IoU={iou} {}", kind.name())).unwrap();
    }
    s.push_str("|\n");
    write!(s, "{:width$} ", "Method").unwrap();
    for _ in COLUMN_GROUPS {
        s.push_str("|  Easy    Mod.    Hard  ");
    }
    s.push_str("|\n");
    write!(s, "{method:width$} ").unwrap();
    for (iou, kind) in COLUMN_GROUPS {
        s.push('|');
        for d in Difficulty::REGIMES {
            match r.get(kind, iou, d) {
                Some(ap) => write!(s, " {:>6.2} ", 100.0 * ap).unwrap(),
                None => s.push_str("    n/a "),
            }
        }
    }
    s.push_str("|\n");
    match r.mean_depth_error {
        Some(e) => writeln!(s, "mean depth error: {e:.4} m over {} matched of {} targets", r.matched, r.n_targets),
        None => writeln!(s, "mean depth error: n/a (no matches among {} targets)", r.n_targets),
    }
    .unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use polydepth_core::eval::ApEntry;

    #[test]
    fn table_lists_groups_in_order() {
        let entries = COLUMN_GROUPS
            .iter()
            .flat_map(|&(t, m)| {
                Difficulty::REGIMES.map(|d| ApEntry { metric: m, threshold: t, difficulty: d, ap: Some(t) })
            })
            .collect();
        let r = EvalReport { entries, mean_depth_error: Some(0.25), matched: 3, n_targets: 4, n_detections: 5 };
        let t = report_table(&r, "oracle");
        let row = t.lines().nth(2).unwrap();
        assert!(row.starts_with("oracle"));
        assert_eq!(row.matches("50.00").count(), 6);
        assert_eq!(row.matches("70.00").count(), 6);
        assert!(t.contains("0.2500 m"));
        let j: serde_json::Value = serde_json::from_str(&report_json(&r)).unwrap();
        assert_eq!(j["entries"].as_array().unwrap().len(), 12);
    }
}
