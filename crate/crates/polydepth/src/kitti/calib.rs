use std::fmt::Write;

use polydepth_core::CameraIntrinsics;

use super::parse_f64;
use crate::ParseError;

/// Entries of a calibration file in file order. Every key is kept, so a
/// parsed file writes back with the same content.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibFile {
    entries: Vec<(String, Vec<f64>)>,
    intrinsics: CameraIntrinsics,
}

impl CalibFile {
    /// A file holding only `P2`, built from intrinsics.
    pub fn from_intrinsics(k: CameraIntrinsics) -> Self {
        let p = k.projection_matrix();
        let values = p.iter().flatten().copied().collect();
        Self { entries: vec![("P2".into(), values)], intrinsics: k }
    }

    pub fn entries(&self) -> &[(String, Vec<f64>)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    /// A 3x4 matrix entry (`P0`..`P3`, `Tr_velo_to_cam`, ...).
    pub fn matrix_3x4(&self, key: &str) -> Option<[[f64; 4]; 3]> {
        let v = self.get(key)?;
        (v.len() == 12).then(|| std::array::from_fn(|r| std::array::from_fn(|c| v[r * 4 + c])))
    }

    pub fn p2(&self) -> [[f64; 4]; 3] {
        self.matrix_3x4("P2").expect("validated at construction")
    }

    /// Intrinsics of the left color camera, translation column included.
    pub fn intrinsics(&self) -> CameraIntrinsics {
        self.intrinsics
    }
}

fn is_projection_key(key: &str) -> bool {
    matches!(key, "P0" | "P1" | "P2" | "P3" | "P_rect_00" | "P_rect_01" | "P_rect_02" | "P_rect_03")
}

/// Parses `KEY: v1 v2 ...` lines. Blank lines are skipped; `P*` entries must
/// hold 12 values and `P2` must be a valid pinhole projection.
pub fn parse_calib(text: &str) -> Result<CalibFile, ParseError> {
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    let mut p2_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            return Err(ParseError::new(line_no, "expected `KEY: values`"));
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ParseError::new(line_no, format!("invalid key {key:?}")));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(ParseError::new(line_no, format!("duplicate key {key}")));
        }
        let values = rest
            .split_whitespace()
            .enumerate()
            .map(|(j, t)| parse_f64(t, line_no, j + 2))
            .collect::<Result<Vec<_>, _>>()?;
        if is_projection_key(key) && values.len() != 12 {
            return Err(ParseError::new(line_no, format!("{key} needs 12 values, found {}", values.len())));
        }
        if key == "P2" {
            p2_line = line_no;
        }
        entries.push((key.to_string(), values));
    }
    let (_, v) = entries
        .iter()
        .find(|(k, _)| k == "P2")
        .ok_or_else(|| ParseError::new(0, "missing P2 entry"))?;
    let p: [[f64; 4]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| v[r * 4 + c]));
    let intrinsics = CameraIntrinsics::from_projection(&p)
        .map_err(|e| ParseError::new(p2_line, format!("P2 is not a usable projection: {e}")))?;
    Ok(CalibFile { entries, intrinsics })
}

pub fn write_calib(c: &CalibFile) -> String {
    let mut out = String::new();
    for (key, values) in &c.entries {
        out.push_str(key);
        out.push(':');
        for v in values {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_p2() {
        let c = parse_calib("P2: 700 0 600 0 0 700 180 0 0 0 1 0\n").unwrap();
        let k = c.intrinsics();
        assert_eq!((k.fx, k.fy, k.cu, k.cv), (700.0, 700.0, 600.0, 180.0));
    }

    #[test]
    fn empty_file_lacks_p2() {
        let e = parse_calib("").unwrap_err();
        assert!(e.message.contains("P2"));
    }

    #[test]
    fn unknown_keys_survive_a_round_trip() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 721.5377 0 609.5593 44.85728 0 721.5377 172.854 0.2163791 0 0 1 0.002745884\nR0_rect: 1 0 0 0 1 0 0 0 1\nfoo: 3.5\n";
        let c = parse_calib(text).unwrap();
        assert_eq!(write_calib(&c), text);
        assert_eq!(c.get("foo"), Some(&[3.5][..]));
        assert_eq!(c.intrinsics().tz, 0.002745884);
    }

    #[test]
    fn positioned_errors() {
        let e = parse_calib("P2: 700 0 600 0 0 700 180 0 0 0 1 0\nP3: 1 2 x 4\n").unwrap_err();
        assert_eq!((e.line, e.field), (2, Some(4)));
        let e = parse_calib("P2: 700 0 600 0 0 700 180 0 0 0 1\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_calib("\n\nP2 700\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_calib("P2: 0 0 600 0 0 700 180 0 0 0 1 0\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_calib("P2: 700 0 600 0 0 700 180 0 0 0 1 nan\n").is_err());
    }
}
