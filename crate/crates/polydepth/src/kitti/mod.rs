//! KITTI object-benchmark file formats.

mod calib;
mod depth_png;
mod label;
mod results;

pub use calib::{parse_calib, write_calib, CalibFile};
pub use depth_png::{decode_depth_raw, encode_depth_png, encode_depth_raw, load_depth_png, DEPTH_SCALE};
pub use label::{parse_labels, write_labels, LabelRecord, DONT_CARE};
pub use results::{detection_record, parse_predictions, write_predictions};

use crate::ParseError;

/// Strict decimal float: `.` as separator, no `inf`/`nan`.
pub(crate) fn parse_f64(token: &str, line: usize, field: usize) -> Result<f64, ParseError> {
    let ok = !token.is_empty()
        && token.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    match token.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Ok(v),
        _ => Err(ParseError::at_field(line, field, format!("expected a number, found {token:?}"))),
    }
}

pub(crate) fn parse_int(token: &str, line: usize, field: usize) -> Result<i64, ParseError> {
    token
        .parse::<i64>()
        .map_err(|_| ParseError::at_field(line, field, format!("expected an integer, found {token:?}")))
}
