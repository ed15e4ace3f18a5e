//! Header-plus-payload files for heatmaps and BEV grids. The header is a
//! short text file of `key values` lines; the payload is raw little-endian
//! samples in the order the header declares.

use std::collections::BTreeMap;
use std::fmt::Write;

use polydepth_core::bev::{BevGrid, BevSpec, Roi};
use polydepth_core::heatmap::{Heatmap, HeatmapGeometry};
use polydepth_core::Pixel;

use crate::kitti::parse_f64;
use crate::sidecar::{parse_permutation, Permutation};
use crate::{Error, ParseError, Result};

pub const HEATMAP_MAGIC: &str = "polydepth-heatmap v1";
pub const BEV_MAGIC: &str = "polydepth-bev v1";
pub const ROI_MAGIC: &str = "polydepth-roi v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    F32,
    F64,
}

impl SampleType {
    fn size(self) -> usize {
        match self {
            SampleType::F32 => 4,
            SampleType::F64 => 8,
        }
    }

    fn parse(s: &str, line: usize) -> Result<Self, ParseError> {
        match s {
            "f32le" => Ok(SampleType::F32),
            "f64le" => Ok(SampleType::F64),
            _ => Err(ParseError::at_field(line, 2, format!("unknown dtype {s:?}"))),
        }
    }

    fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            SampleType::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect(),
            SampleType::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        }
    }
}

/// key -> (line number, values)
fn header_map<'a>(text: &'a str, magic: &str) -> Result<BTreeMap<&'a str, (usize, Vec<&'a str>)>, ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == magic => {}
        Some((i, _)) => return Err(ParseError::new(i + 1, format!("expected `{magic}`"))),
        None => return Err(ParseError::new(0, format!("empty header, expected `{magic}`"))),
    }
    let mut map = BTreeMap::new();
    for (i, l) in lines {
        let mut t = l.split_whitespace();
        let key = t.next().unwrap_or_default();
        if map.insert(key, (i + 1, t.collect())).is_some() {
            return Err(ParseError::new(i + 1, format!("duplicate key {key}")));
        }
    }
    Ok(map)
}

fn values<'a>(
    map: &BTreeMap<&str, (usize, Vec<&'a str>)>,
    key: &str,
    n: usize,
) -> Result<(usize, Vec<&'a str>), ParseError> {
    let (line, v) = map.get(key).ok_or_else(|| ParseError::new(0, format!("missing `{key}`")))?;
    if v.len() != n {
        return Err(ParseError::new(*line, format!("`{key}` needs {n} values, found {}", v.len())));
    }
    Ok((*line, v.clone()))
}

fn floats<const N: usize>(map: &BTreeMap<&str, (usize, Vec<&str>)>, key: &str) -> Result<[f64; N], ParseError> {
    let (line, v) = values(map, key, N)?;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = parse_f64(v[i], line, i + 2)?;
    }
    Ok(out)
}

fn sizes<const N: usize>(map: &BTreeMap<&str, (usize, Vec<&str>)>, key: &str) -> Result<[usize; N], ParseError> {
    let (line, v) = values(map, key, N)?;
    let mut out = [0usize; N];
    for i in 0..N {
        out[i] = v[i]
            .parse()
            .map_err(|_| ParseError::at_field(line, i + 2, format!("expected a size, found {:?}", v[i])))?;
    }
    Ok(out)
}

fn header_error(e: ParseError) -> Error {
    Error::Format(format!("header {e}"))
}

/// Header and f32 payload, grids in canonical order.
pub fn write_heatmap(m: &Heatmap) -> (String, Vec<u8>) {
    let g = m.geometry();
    let mut h = format!("{HEATMAP_MAGIC}\n");
    writeln!(h, "dims 8 {} {}", g.height, g.width).unwrap();
    writeln!(h, "stride {}", g.stride).unwrap();
    writeln!(h, "origin {} {}", g.origin.u, g.origin.v).unwrap();
    writeln!(h, "dtype f32le").unwrap();
    writeln!(h, "{}", Permutation::IDENTITY.header().trim_start_matches('#')).unwrap();
    let data = m.grids().iter().flatten().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    (h, data)
}

/// Keys: `dims 8 H W`, `stride s`, optional `origin u v`, `dtype f32le|f64le`,
/// optional `permutation p1 .. p8`. The payload holds 8 grids of H x W
/// row-major samples.
pub fn read_heatmap(header: &str, payload: &[u8]) -> Result<Heatmap> {
    let map = header_map(header, HEATMAP_MAGIC).map_err(header_error)?;
    let [n, height, width] = sizes::<3>(&map, "dims").map_err(header_error)?;
    if n != 8 || height == 0 || width == 0 {
        return Err(Error::Format("heatmap: dims must be `8 H W` with H, W > 0".into()));
    }
    let [stride] = floats::<1>(&map, "stride").map_err(header_error)?;
    if !(stride > 0.0) {
        return Err(Error::Format("heatmap: stride must be positive".into()));
    }
    let origin = if map.contains_key("origin") {
        let [u, v] = floats::<2>(&map, "origin").map_err(header_error)?;
        Pixel::new(u, v)
    } else {
        Pixel::default()
    };
    let (line, dtype) = values(&map, "dtype", 1).map_err(header_error)?;
    let dtype = SampleType::parse(dtype[0], line).map_err(header_error)?;
    let perm = match map.get("permutation") {
        Some((line, v)) => parse_permutation(&v.join(" "), *line).map_err(header_error)?,
        None => Permutation::IDENTITY,
    };
    let plane = height * width;
    if payload.len() != 8 * plane * dtype.size() {
        return Err(Error::Format(format!(
            "heatmap: payload is {} bytes, header implies {}",
            payload.len(),
            8 * plane * dtype.size()
        )));
    }
    let samples = dtype.decode(payload);
    let mut grids: [Vec<f64>; 8] = Default::default();
    for k in 0..8 {
        grids[perm.0[k]] = samples[k * plane..(k + 1) * plane].to_vec();
    }
    let geom = HeatmapGeometry::new(width, height, stride).with_origin(origin);
    Ok(Heatmap::new(geom, grids)?)
}

pub fn write_bev(grid: &BevGrid) -> (String, Vec<u8>) {
    let s = grid.spec();
    let mut h = format!("{BEV_MAGIC}\n");
    writeln!(h, "x_range {} {}", s.x_range.0, s.x_range.1).unwrap();
    writeln!(h, "y_range {} {}", s.y_range.0, s.y_range.1).unwrap();
    writeln!(h, "z_range {} {}", s.z_range.0, s.z_range.1).unwrap();
    writeln!(h, "resolution {}", s.resolution).unwrap();
    writeln!(h, "slices {}", s.n_slices).unwrap();
    writeln!(h, "shape {} {} {}", grid.channels(), grid.rows(), grid.cols()).unwrap();
    writeln!(h, "dtype f32le").unwrap();
    (h, grid.to_le_bytes())
}

pub fn read_bev(header: &str, payload: &[u8]) -> Result<BevGrid> {
    let map = header_map(header, BEV_MAGIC).map_err(header_error)?;
    let r = |k| floats::<2>(&map, k).map(|[a, b]| (a, b)).map_err(header_error);
    let spec = BevSpec {
        x_range: r("x_range")?,
        y_range: r("y_range")?,
        z_range: r("z_range")?,
        resolution: floats::<1>(&map, "resolution").map_err(header_error)?[0],
        n_slices: sizes::<1>(&map, "slices").map_err(header_error)?[0],
    };
    spec.validate()?;
    let shape = sizes::<3>(&map, "shape").map_err(header_error)?;
    if shape != [spec.channels(), spec.rows(), spec.cols()] {
        return Err(Error::Format("bev: shape disagrees with ranges and resolution".into()));
    }
    let (line, dtype) = values(&map, "dtype", 1).map_err(header_error)?;
    if SampleType::parse(dtype[0], line).map_err(header_error)? != SampleType::F32 {
        return Err(Error::Format("bev: only f32le payloads are supported".into()));
    }
    if payload.len() != shape.iter().product::<usize>() * 4 {
        return Err(Error::Format("bev: payload size disagrees with shape".into()));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(BevGrid::from_data(spec, data)?)
}

pub fn write_roi(roi: &Roi) -> (String, Vec<u8>) {
    let (x0, x1, z0, z1) = roi.window;
    let mut h = format!("{ROI_MAGIC}\n");
    writeln!(h, "window {x0} {x1} {z0} {z1}").unwrap();
    writeln!(h, "shape {} {} {}", roi.channels, roi.height, roi.width).unwrap();
    writeln!(h, "dtype f32le").unwrap();
    (h, roi.data.iter().flat_map(|v| v.to_le_bytes()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use polydepth_core::Point3;

    #[test]
    fn heatmap_round_trip() {
        let geom = HeatmapGeometry::new(5, 3, 4.0).with_origin(Pixel::new(100.0, 20.0));
        let grids = std::array::from_fn(|k| (0..15).map(|i| (i * (k + 1)) as f64 * 0.25).collect());
        let m = Heatmap::new(geom, grids).unwrap();
        let (h, data) = write_heatmap(&m);
        assert_eq!(read_heatmap(&h, &data).unwrap(), m);
        assert!(read_heatmap(&h, &data[1..]).is_err());
    }

    #[test]
    fn heatmap_permutation_and_f64() {
        let header = format!("{HEATMAP_MAGIC}\ndims 8 1 2\nstride 1\ndtype f64le\npermutation 2 1 3 4 5 6 7 8\n");
        let data: Vec<u8> = (0..16).flat_map(|i| (i as f64).to_le_bytes()).collect();
        let m = read_heatmap(&header, &data).unwrap();
        assert_eq!(m.grid(1), &[0.0, 1.0]);
        assert_eq!(m.grid(0), &[2.0, 3.0]);
    }

    #[test]
    fn bev_round_trip() {
        let spec = BevSpec { x_range: (-2.0, 2.0), z_range: (0.0, 3.0), resolution: 0.5, ..BevSpec::default() };
        let g = polydepth_core::bev::rasterize_bev(&[Point3::new(0.3, 1.0, 1.2), Point3::new(-1.9, 3.9, 2.9)], &spec).unwrap();
        let (h, data) = write_bev(&g);
        assert_eq!(read_bev(&h, &data).unwrap(), g);
        let bad = h.replace("shape 9 6 8", "shape 9 6 9");
        assert!(read_bev(&bad, &data).is_err());
    }

    #[test]
    fn malformed_headers() {
        assert!(read_heatmap("", &[]).is_err());
        assert!(read_heatmap(&format!("{HEATMAP_MAGIC}\ndims 8 1\n"), &[]).is_err());
        assert!(read_heatmap(&format!("{HEATMAP_MAGIC}\ndims 8 1 1\nstride 1\ndtype u8\n"), &[0; 8]).is_err());
        assert!(read_bev("polydepth-bev v2\n", &[]).is_err());
    }
}
