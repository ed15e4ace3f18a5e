//! Text sidecars carrying external stage outputs for one frame: structured
//! polygons, height codes `t_H` and refinement residuals, keyed by object id.
//!
//! Each file starts with `#` header lines. `#permutation p1 .. p8` states that
//! the k-th vertex of a record (or k-th grid of a heatmap) is canonical vertex
//! `p_k` (1-based); omitted means identity. Polygon files require it.

use std::collections::BTreeSet;
use std::fmt::Write;

use polydepth_core::bev::BoxResiduals;
use polydepth_core::heatmap::PolygonEstimate;
use polydepth_core::{Pixel, StructuredPolygon};

use crate::kitti::{parse_f64, parse_int};
use crate::ParseError;

pub const POLYGONS_MAGIC: &str = "#polygons v1";
pub const HEIGHTS_MAGIC: &str = "#heights v1";
pub const RESIDUALS_MAGIC: &str = "#residuals v1";

/// File-order to canonical vertex mapping (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Permutation(pub [usize; 8]);

impl Permutation {
    pub const IDENTITY: Permutation = Permutation([0, 1, 2, 3, 4, 5, 6, 7]);

    /// From 1-based indices; must use each of 1..=8 once.
    pub fn from_one_based(p: [usize; 8]) -> Option<Self> {
        let seen: BTreeSet<usize> = p.iter().copied().collect();
        (seen.len() == 8 && p.iter().all(|v| (1..=8).contains(v))).then(|| Permutation(p.map(|v| v - 1)))
    }

    pub fn header(&self) -> String {
        let mut s = String::from("#permutation");
        for v in self.0 {
            write!(s, " {}", v + 1).unwrap();
        }
        s
    }
}

pub(crate) fn parse_permutation(rest: &str, line: usize) -> Result<Permutation, ParseError> {
    let t: Vec<&str> = rest.split_whitespace().collect();
    if t.len() != 8 {
        return Err(ParseError::new(line, format!("permutation needs 8 indices, found {}", t.len())));
    }
    let mut p = [0usize; 8];
    for (i, tok) in t.iter().enumerate() {
        p[i] = tok
            .parse()
            .map_err(|_| ParseError::at_field(line, i + 2, format!("bad vertex index {tok:?}")))?;
    }
    Permutation::from_one_based(p).ok_or_else(|| ParseError::new(line, "permutation must use 1..8 once each"))
}

struct Parsed<'a> {
    permutation: Option<Permutation>,
    /// (line number, tokens)
    records: Vec<(usize, Vec<&'a str>)>,
}

fn split<'a>(text: &'a str, magic: &str) -> Result<Parsed<'a>, ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == magic => {}
        Some((i, _)) => return Err(ParseError::new(i + 1, format!("expected header `{magic}`"))),
        None => return Err(ParseError::new(0, format!("empty file, expected header `{magic}`"))),
    }
    let mut permutation = None;
    let mut records = Vec::new();
    for (i, l) in lines {
        let l = l.trim();
        if let Some(rest) = l.strip_prefix("#permutation") {
            if permutation.is_some() || !records.is_empty() {
                return Err(ParseError::new(i + 1, "permutation must appear once, before the records"));
            }
            permutation = Some(parse_permutation(rest, i + 1)?);
        } else if !l.starts_with('#') {
            records.push((i + 1, l.split_whitespace().collect()));
        }
    }
    Ok(Parsed { permutation, records })
}

fn parse_id(tok: &str, line: usize, seen: &mut BTreeSet<u32>) -> Result<u32, ParseError> {
    let id = parse_int(tok, line, 1)?;
    let id = u32::try_from(id).map_err(|_| ParseError::at_field(line, 1, "object id out of range"))?;
    if !seen.insert(id) {
        return Err(ParseError::at_field(line, 1, format!("duplicate object id {id}")));
    }
    Ok(id)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonRecord {
    pub id: u32,
    /// Canonical vertex order; scores default to 1 when the file has none.
    pub estimate: PolygonEstimate,
}

/// Records are `id u1 v1 .. u8 v8 [s1 .. s8]`.
pub fn parse_polygons(text: &str) -> Result<Vec<PolygonRecord>, ParseError> {
    let parsed = split(text, POLYGONS_MAGIC)?;
    let first_record = parsed.records.first().map_or(0, |r| r.0);
    let perm = parsed
        .permutation
        .ok_or_else(|| ParseError::new(first_record, "polygon files must declare `#permutation`"))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, t) in parsed.records {
        if t.len() != 17 && t.len() != 25 {
            return Err(ParseError::new(line, format!("expected 17 or 25 fields, found {}", t.len())));
        }
        let id = parse_id(t[0], line, &mut seen)?;
        let v = |i: usize| parse_f64(t[i], line, i + 1);
        let mut file_vertices = [Pixel::default(); 8];
        let mut file_scores = [1.0; 8];
        for k in 0..8 {
            file_vertices[k] = Pixel::new(v(1 + 2 * k)?, v(2 + 2 * k)?);
            if t.len() == 25 {
                file_scores[k] = v(17 + k)?;
            }
        }
        let polygon = StructuredPolygon { vertices: file_vertices }.permuted(&perm.0);
        let mut scores = [0.0; 8];
        for k in 0..8 {
            scores[perm.0[k]] = file_scores[k];
        }
        out.push(PolygonRecord { id, estimate: PolygonEstimate { polygon, scores } });
    }
    Ok(out)
}

/// Writes canonical order with the identity permutation and scores.
pub fn write_polygons(records: &[PolygonRecord]) -> String {
    let mut out = format!("{POLYGONS_MAGIC}\n{}\n", Permutation::IDENTITY.header());
    for r in records {
        write!(out, "{}", r.id).unwrap();
        for p in &r.estimate.polygon.vertices {
            write!(out, " {} {}", p.u, p.v).unwrap();
        }
        for s in &r.estimate.scores {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Records are `id t_H`.
pub fn parse_heights(text: &str) -> Result<Vec<(u32, f64)>, ParseError> {
    let parsed = split(text, HEIGHTS_MAGIC)?;
    let mut seen = BTreeSet::new();
    parsed
        .records
        .into_iter()
        .map(|(line, t)| {
            if t.len() != 2 {
                return Err(ParseError::new(line, format!("expected 2 fields, found {}", t.len())));
            }
            Ok((parse_id(t[0], line, &mut seen)?, parse_f64(t[1], line, 2)?))
        })
        .collect()
}

pub fn write_heights(records: &[(u32, f64)]) -> String {
    let mut out = format!("{HEIGHTS_MAGIC}\n");
    for (id, t) in records {
        writeln!(out, "{id} {t}").unwrap();
    }
    out
}

/// Records are `id dx dy dz dl dw dh dtheta`.
pub fn parse_residuals(text: &str) -> Result<Vec<(u32, BoxResiduals)>, ParseError> {
    let parsed = split(text, RESIDUALS_MAGIC)?;
    let mut seen = BTreeSet::new();
    parsed
        .records
        .into_iter()
        .map(|(line, t)| {
            if t.len() != 8 {
                return Err(ParseError::new(line, format!("expected 8 fields, found {}", t.len())));
            }
            let id = parse_id(t[0], line, &mut seen)?;
            let mut a = [0.0; 7];
            for (k, v) in a.iter_mut().enumerate() {
                *v = parse_f64(t[k + 1], line, k + 2)?;
            }
            Ok((id, BoxResiduals::from_array(a)))
        })
        .collect()
}

pub fn write_residuals(records: &[(u32, BoxResiduals)]) -> String {
    let mut out = format!("{RESIDUALS_MAGIC}\n");
    for (id, r) in records {
        write!(out, "{id}").unwrap();
        for v in r.as_array() {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}
