//! Per-vertex heatmaps: argmax decoding, one-hot label maps, the squared
//! error loss, and a ground-truth oracle standing in for a trained network.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{project_box, Box3D, CameraIntrinsics, Pixel, StructuredPolygon};
use crate::math::floor;
use crate::{Error, Result};

/// Default number of image pixels per heatmap cell.
pub const DEFAULT_STRIDE: f64 = 4.0;

/// Where a heatmap sits in the image.
///
/// Cell `(row, col)` covers image pixels
/// `origin + [col * stride, (col + 1) * stride) x [row * stride, (row + 1) * stride)`
/// and decodes to its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapGeometry {
    pub width: usize,
    pub height: usize,
    pub stride: f64,
    pub origin: Pixel,
}

impl HeatmapGeometry {
    pub fn new(width: usize, height: usize, stride: f64) -> Self {
        Self { width, height, stride, origin: Pixel::new(0.0, 0.0) }
    }

    pub fn with_origin(mut self, origin: Pixel) -> Self {
        self.origin = origin;
        self
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    fn validate(&self) -> Result<()> {
        if self.cells() == 0 {
            return Err(Error::InvalidHeatmap("zero-sized grid"));
        }
        if !(self.stride > 0.0 && self.stride.is_finite()) {
            return Err(Error::InvalidHeatmap("stride must be positive"));
        }
        Ok(())
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Pixel {
        Pixel::new(
            self.origin.u + (col as f64 + 0.5) * self.stride,
            self.origin.v + (row as f64 + 0.5) * self.stride,
        )
    }

    /// Cell containing an image point, if it lies inside the grid.
    pub fn cell_of(&self, p: Pixel) -> Option<(usize, usize)> {
        let c = floor((p.u - self.origin.u) / self.stride);
        let r = floor((p.v - self.origin.v) / self.stride);
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }
}

/// Eight row-major score grids, one per cuboid vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    geometry: HeatmapGeometry,
    grids: [Vec<f64>; 8],
}

impl Heatmap {
    pub fn new(geometry: HeatmapGeometry, grids: [Vec<f64>; 8]) -> Result<Self> {
        geometry.validate()?;
        if grids.iter().any(|g| g.len() != geometry.cells()) {
            return Err(Error::ShapeMismatch("grid length differs from width * height"));
        }
        Ok(Self { geometry, grids })
    }

    pub fn zeros(geometry: HeatmapGeometry) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.cells();
        Ok(Self { geometry, grids: core::array::from_fn(|_| vec![0.0; n]) })
    }

    pub fn geometry(&self) -> &HeatmapGeometry {
        &self.geometry
    }

    pub fn grid(&self, vertex: usize) -> &[f64] {
        &self.grids[vertex]
    }

    pub fn grid_mut(&mut self, vertex: usize) -> &mut [f64] {
        &mut self.grids[vertex]
    }

    pub fn get(&self, vertex: usize, row: usize, col: usize) -> f64 {
        self.grids[vertex][row * self.geometry.width + col]
    }

    pub fn grids(&self) -> &[Vec<f64>; 8] {
        &self.grids
    }
}

/// A structured polygon together with a confidence per vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonEstimate {
    pub polygon: StructuredPolygon,
    pub scores: [f64; 8],
}

impl PolygonEstimate {
    pub fn mean_score(&self) -> f64 {
        self.scores.iter().sum::<f64>() / 8.0
    }
}

/// Takes the argmax cell of every grid. Ties go to the smallest row, then
/// the smallest column; NaN cells never win.
pub fn decode_heatmap(m: &Heatmap) -> Result<PolygonEstimate> {
    let geom = m.geometry;
    let mut vertices = [Pixel::default(); 8];
    let mut scores = [0.0; 8];
    for (i, grid) in m.grids.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &v) in grid.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((idx, v)),
            }
        }
        let (idx, score) = best.ok_or(Error::InvalidHeatmap("grid has no finite values"))?;
        vertices[i] = geom.cell_center(idx / geom.width, idx % geom.width);
        scores[i] = score;
    }
    Ok(PolygonEstimate { polygon: StructuredPolygon { vertices }, scores })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTarget {
    pub heatmap: Heatmap,
    /// Vertices that fell outside the grid; their label map is all zero.
    pub out_of_bounds: [bool; 8],
}

/// One-hot label maps: the cell containing each vertex is 1, all others 0.
pub fn render_target(p: &StructuredPolygon, geometry: HeatmapGeometry) -> Result<RenderedTarget> {
    let mut heatmap = Heatmap::zeros(geometry)?;
    let mut out_of_bounds = [false; 8];
    for (i, v) in p.vertices.iter().enumerate() {
        match geometry.cell_of(*v) {
            Some((r, c)) => heatmap.grids[i][r * geometry.width + c] = 1.0,
            None => out_of_bounds[i] = true,
        }
    }
    Ok(RenderedTarget { heatmap, out_of_bounds })
}

/// Sum over all eight grids of squared per-cell differences.
pub fn euclidean_loss(prediction: &Heatmap, target: &Heatmap) -> Result<f64> {
    let (a, b) = (prediction.geometry, target.geometry);
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch("heatmaps have different dimensions"));
    }
    Ok(prediction
        .grids
        .iter()
        .zip(target.grids.iter())
        .map(|(p, t)| p.iter().zip(t).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum())
}

/// Ground-truth polygon with i.i.d. Gaussian noise of `sigma` pixels on every
/// coordinate. Scores are all 1. With `sigma == 0` no random numbers are
/// drawn and the exact projection is returned.
pub fn oracle_polygon<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    gt: &Box3D,
    sigma: f64,
    rng: &mut R,
) -> Result<PolygonEstimate> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter { name: "sigma_px", value: sigma });
    }
    let mut polygon = project_box(k, gt)?;
    if sigma > 0.0 {
        for p in polygon.vertices.iter_mut() {
            let du: f64 = rng.sample(StandardNormal);
            let dv: f64 = rng.sample(StandardNormal);
            p.u += sigma * du;
            p.v += sigma * dv;
        }
    }
    Ok(PolygonEstimate { polygon, scores: [1.0; 8] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(geom: HeatmapGeometry, row: usize, col: usize) -> Heatmap {
        let mut m = Heatmap::zeros(geom).unwrap();
        for i in 0..8 {
            m.grid_mut(i)[row * geom.width + col] = 1.0;
        }
        m
    }

    #[test]
    fn decode_one_hot_cell_center() {
        let geom = HeatmapGeometry::new(64, 32, 4.0);
        let est = decode_heatmap(&one_hot(geom, 12, 30)).unwrap();
        for i in 0..8 {
            assert_eq!(est.polygon.vertices[i], Pixel::new(122.0, 50.0));
            assert_eq!(est.scores[i], 1.0);
        }
    }

    #[test]
    fn decode_uniform_breaks_ties_at_origin() {
        let geom = HeatmapGeometry::new(10, 7, 4.0);
        let m = Heatmap::new(geom, core::array::from_fn(|_| vec![0.3; 70])).unwrap();
        let est = decode_heatmap(&m).unwrap();
        assert_eq!(est.polygon.vertices[0], Pixel::new(2.0, 2.0));
    }

    #[test]
    fn decode_tie_prefers_smaller_row_then_column() {
        let geom = HeatmapGeometry::new(5, 5, 1.0);
        let mut m = Heatmap::zeros(geom).unwrap();
        for i in 0..8 {
            let g = m.grid_mut(i);
            g[3 * 5 + 1] = 2.0;
            g[1 * 5 + 4] = 2.0;
            g[1 * 5 + 2] = 2.0;
        }
        let est = decode_heatmap(&m).unwrap();
        assert_eq!(est.polygon.vertices[0], Pixel::new(2.5, 1.5));
    }

    #[test]
    fn decode_rejects_empty_and_nan() {
        assert!(Heatmap::zeros(HeatmapGeometry::new(0, 4, 4.0)).is_err());
        let geom = HeatmapGeometry::new(2, 2, 4.0);
        let m = Heatmap::new(geom, core::array::from_fn(|_| vec![f64::NAN; 4])).unwrap();
        assert!(matches!(decode_heatmap(&m), Err(Error::InvalidHeatmap(_))));
        assert!(Heatmap::new(geom, core::array::from_fn(|_| vec![0.0; 3])).is_err());
    }

    #[test]
    fn render_examples() {
        let geom = HeatmapGeometry::new(64, 32, 4.0);
        let poly = StructuredPolygon { vertices: [Pixel::new(122.0, 50.0); 8] };
        let t = render_target(&poly, geom).unwrap();
        assert_eq!(t.heatmap.get(0, 12, 30), 1.0);
        assert_eq!(t.out_of_bounds, [false; 8]);

        let mut vertices = [Pixel::new(122.0, 50.0); 8];
        vertices[3] = Pixel::new(-1.0, 50.0);
        vertices[5] = Pixel::new(10.0, 128.0);
        let t = render_target(&StructuredPolygon { vertices }, geom).unwrap();
        assert!(t.out_of_bounds[3] && t.out_of_bounds[5]);
        for i in 0..8 {
            let s: f64 = t.heatmap.grid(i).iter().sum();
            assert_eq!(s, if t.out_of_bounds[i] { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn loss_examples() {
        let geom = HeatmapGeometry::new(8, 8, 4.0);
        let target = one_hot(geom, 2, 3);
        assert_eq!(euclidean_loss(&target, &target).unwrap(), 0.0);
        let zeros = Heatmap::zeros(geom).unwrap();
        assert_eq!(euclidean_loss(&zeros, &target).unwrap(), 8.0);

        let mut m = zeros.clone();
        m.grid_mut(4)[0] = 0.5;
        m.grid_mut(4)[9] = -0.5;
        assert_eq!(euclidean_loss(&m, &zeros).unwrap(), 0.5);

        let other = Heatmap::zeros(HeatmapGeometry::new(8, 4, 4.0)).unwrap();
        assert!(matches!(euclidean_loss(&other, &zeros), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn oracle_zero_noise_is_exact_projection() {
        let k = CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap();
        let b = Box3D::new(1.0, 1.6, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = oracle_polygon(&k, &b, 0.0, &mut rng).unwrap();
        assert_eq!(est.polygon, project_box(&k, &b).unwrap());
        assert!(oracle_polygon(&k, &b, -1.0, &mut rng).is_err());
    }

    #[test]
    fn oracle_is_deterministic() {
        let k = CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap();
        let b = Box3D::new(1.0, 1.6, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let a = oracle_polygon(&k, &b, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let c = oracle_polygon(&k, &b, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for (p, q) in a.polygon.vertices.iter().zip(c.polygon.vertices.iter()) {
            assert_eq!(p.u.to_bits(), q.u.to_bits());
            assert_eq!(p.v.to_bits(), q.v.to_bits());
        }
    }

    #[test]
    fn oracle_noise_has_requested_spread() {
        let k = CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap();
        let b = Box3D::new(1.0, 1.6, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let exact = project_box(&k, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let est = oracle_polygon(&k, &b, 1.0, &mut rng).unwrap();
            let d = est.polygon.vertices[2].u - exact.vertices[2].u;
            s += d;
            s2 += d * d;
        }
        let mean = s / n as f64;
        let std = libm::sqrt(s2 / n as f64 - mean * mean);
        assert!((std - 1.0).abs() < 0.05, "std {std}");
    }
}
