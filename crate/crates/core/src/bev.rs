//! Bird's-eye-view rasterization of depth maps, 3D-ROI extraction around
//! coarse boxes, and residual refinement.
//!
//! Grid rows index depth Z with row 0 at the far edge; columns index X with
//! column 0 at `x_min`. Channels `0..n_slices` are occupancy of equal-height
//! Y slices; the last channel holds the maximum of `y_max - Y` over the points
//! of the cell, so taller structures have larger values.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Box3D, CameraIntrinsics, Pixel, Point3};
use crate::math::{angle_diff, floor, normalize_angle, round};
use crate::{Error, Result};

/// Per-pixel camera depth in meters; `0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidDepthMap("data length differs from width * height"));
        }
        if data.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidDepthMap("depths must be finite and non-negative"));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Depth at column `u`, row `v`.
    pub fn depth(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Lifts every valid pixel `(u, v)` (integer pixel coordinates) to 3D.
pub fn depth_to_points(k: &CameraIntrinsics, d: &DepthMap) -> Vec<Point3> {
    let mut out = Vec::new();
    for v in 0..d.height {
        for u in 0..d.width {
            let z = d.depth(u, v);
            if z > 0.0 {
                if let Ok(p) = k.backproject(Pixel::new(u as f64, v as f64), z) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Extent and resolution of a BEV grid. Ranges are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    pub resolution: f64,
    pub n_slices: usize,
}

impl Default for BevSpec {
    fn default() -> Self {
        Self {
            x_range: (-25.0, 25.0),
            y_range: (-1.5, 4.09),
            z_range: (0.0, 50.0),
            resolution: 0.1,
            n_slices: 8,
        }
    }
}

impl BevSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !(ok(self.x_range) && ok(self.y_range) && ok(self.z_range)) {
            return Err(Error::InvalidParameter { name: "bev range", value: f64::NAN });
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidParameter { name: "bev resolution", value: self.resolution });
        }
        if self.n_slices == 0 {
            return Err(Error::InvalidParameter { name: "n_slices", value: 0.0 });
        }
        if self.cols() == 0 || self.rows() == 0 {
            return Err(Error::InvalidParameter { name: "bev resolution", value: self.resolution });
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        round((self.x_range.1 - self.x_range.0) / self.resolution) as usize
    }

    pub fn rows(&self) -> usize {
        round((self.z_range.1 - self.z_range.0) / self.resolution) as usize
    }

    pub fn channels(&self) -> usize {
        self.n_slices + 1
    }

    fn in_range(r: (f64, f64), v: f64) -> bool {
        v >= r.0 && v <= r.1
    }

    /// `(row, col)` of the cell containing ground position `(x, z)`.
    pub fn cell_of(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        if !(Self::in_range(self.x_range, x) && Self::in_range(self.z_range, z)) {
            return None;
        }
        let col = (floor((x - self.x_range.0) / self.resolution) as usize).min(self.cols() - 1);
        let row = (floor((self.z_range.1 - z) / self.resolution) as usize).min(self.rows() - 1);
        Some((row, col))
    }

    pub fn slice_of(&self, y: f64) -> Option<usize> {
        if !Self::in_range(self.y_range, y) {
            return None;
        }
        let slice_height = (self.y_range.1 - self.y_range.0) / self.n_slices as f64;
        Some((floor((y - self.y_range.0) / slice_height) as usize).min(self.n_slices - 1))
    }

    /// Ground position `(x, z)` of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_range.0 + (col as f64 + 0.5) * self.resolution,
            self.z_range.1 - (row as f64 + 0.5) * self.resolution,
        )
    }
}

/// Multi-channel top-down raster, stored channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    spec: BevSpec,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl BevGrid {
    pub fn zeros(spec: BevSpec) -> Result<Self> {
        spec.validate()?;
        Self::from_data(spec, vec![0.0; spec.channels() * spec.rows() * spec.cols()])
    }

    pub fn from_data(spec: BevSpec, data: Vec<f32>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.channels() * spec.rows() * spec.cols() {
            return Err(Error::ShapeMismatch("BEV data length differs from channels * rows * cols"));
        }
        Ok(Self { rows: spec.rows(), cols: spec.cols(), spec, data })
    }

    pub fn spec(&self) -> &BevSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.spec.channels()
    }

    pub fn height_channel(&self) -> usize {
        self.spec.n_slices
    }

    #[inline]
    fn index(&self, channel: usize, row: usize, col: usize) -> usize {
        (channel * self.rows + row) * self.cols + col
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[self.index(channel, row, col)]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Little-endian f32 bytes in storage order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Adds one point; returns whether it was inside the ranges.
    pub fn insert(&mut self, p: Point3) -> bool {
        let (Some((row, col)), Some(slice)) = (self.spec.cell_of(p.x, p.z), self.spec.slice_of(p.y)) else {
            return false;
        };
        let occ = self.index(slice, row, col);
        self.data[occ] = 1.0;
        let hi = self.index(self.height_channel(), row, col);
        let value = (self.spec.y_range.1 - p.y) as f32;
        if value > self.data[hi] {
            self.data[hi] = value;
        }
        true
    }

    /// Cell-wise union of two grids with the same spec (occupancy OR,
    /// height max). Used to merge partial rasters built in parallel.
    pub fn merge(&mut self, other: &BevGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::ShapeMismatch("BEV specs differ"));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            if *b > *a {
                *a = *b;
            }
        }
        Ok(())
    }
}

/// Rasterizes a point cloud, dropping points outside the ranges. Every
/// update is a max, so the result does not depend on point order.
pub fn rasterize_bev(points: &[Point3], spec: &BevSpec) -> Result<BevGrid> {
    let mut grid = BevGrid::zeros(*spec)?;
    for p in points {
        grid.insert(*p);
    }
    Ok(grid)
}

/// Output size and window scale of a 3D-ROI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    /// Columns, along X.
    pub width: usize,
    /// Rows, along Z.
    pub height: usize,
    /// Window side as a multiple of `max(l, w)` of the coarse box.
    pub scale: f64,
}

impl Default for RoiSpec {
    fn default() -> Self {
        Self { width: 256, height: 456, scale: 2.0 }
    }
}

/// Fixed-size raster cut from a [`BevGrid`], stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Ground window `(x_min, x_max, z_min, z_max)` the raster covers.
    pub window: (f64, f64, f64, f64),
    pub data: Vec<f32>,
}

impl Roi {
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    /// Fraction of cells with any occupied slice.
    pub fn occupancy(&self, n_slices: usize) -> f64 {
        let plane = self.width * self.height;
        let occupied = (0..plane)
            .filter(|&i| (0..n_slices.min(self.channels)).any(|c| self.data[c * plane + i] > 0.0))
            .count();
        occupied as f64 / plane as f64
    }
}

/// Cuts an axis-aligned window centered on the coarse box, of side
/// `scale * max(l, w)` in both X and Z, and resamples it by nearest neighbour
/// to `width x height`. Window area outside the grid reads as zero.
pub fn extract_3d_roi(grid: &BevGrid, coarse: &Box3D, roi: &RoiSpec) -> Result<Roi> {
    let spec = grid.spec();
    if spec.cell_of(coarse.x, coarse.z).is_none() {
        return Err(Error::RoiOutOfRange { x: coarse.x, z: coarse.z });
    }
    if roi.width == 0 || roi.height == 0 || !(roi.scale > 0.0) {
        return Err(Error::InvalidParameter { name: "roi", value: roi.scale });
    }
    let side = roi.scale * coarse.l.max(coarse.w);
    let x0 = coarse.x - 0.5 * side;
    let z1 = coarse.z + 0.5 * side;
    let dx = side / roi.width as f64;
    let dz = side / roi.height as f64;

    // rows depend only on z and columns only on x, so both maps are separable
    let rows: Vec<Option<usize>> =
        (0..roi.height).map(|i| spec.cell_of(spec.x_range.0, z1 - (i as f64 + 0.5) * dz).map(|c| c.0)).collect();
    let cols: Vec<Option<usize>> =
        (0..roi.width).map(|j| spec.cell_of(x0 + (j as f64 + 0.5) * dx, spec.z_range.1).map(|c| c.1)).collect();

    let channels = grid.channels();
    let plane = roi.width * roi.height;
    let mut data = vec![0.0f32; channels * plane];
    for c in 0..channels {
        for (i, row) in rows.iter().enumerate() {
            let Some(row) = *row else { continue };
            let out = &mut data[c * plane + i * roi.width..][..roi.width];
            for (o, col) in out.iter_mut().zip(&cols) {
                if let Some(col) = *col {
                    *o = grid.get(c, row, col);
                }
            }
        }
    }
    Ok(Roi {
        width: roi.width,
        height: roi.height,
        channels,
        window: (x0, x0 + side, z1 - side, z1),
        data,
    })
}

/// Additive corrections to a coarse box, in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxResiduals {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dl: f64,
    pub dw: f64,
    pub dh: f64,
    pub dtheta: f64,
}

impl BoxResiduals {
    pub fn as_array(&self) -> [f64; 7] {
        [self.dx, self.dy, self.dz, self.dl, self.dw, self.dh, self.dtheta]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        let [dx, dy, dz, dl, dw, dh, dtheta] = a;
        Self { dx, dy, dz, dl, dw, dh, dtheta }
    }
}

pub fn apply_residuals(coarse: &Box3D, r: &BoxResiduals) -> Result<Box3D> {
    if r.as_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "residual", value: f64::NAN });
    }
    Box3D::new(
        coarse.x + r.dx,
        coarse.y + r.dy,
        coarse.z + r.dz,
        coarse.l + r.dl,
        coarse.w + r.dw,
        coarse.h + r.dh,
        normalize_angle(coarse.theta + r.dtheta),
    )
}

/// Residuals that take `from` to `to`; the yaw difference is the short way
/// round the circle.
pub fn residuals_between(from: &Box3D, to: &Box3D) -> BoxResiduals {
    BoxResiduals {
        dx: to.x - from.x,
        dy: to.y - from.y,
        dz: to.z - from.z,
        dl: to.l - from.l,
        dw: to.w - from.w,
        dh: to.h - from.h,
        dtheta: angle_diff(to.theta, from.theta),
    }
}

/// Gaussian noise levels for oracle residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualNoise {
    /// Meters, on x, y and z.
    pub position: f64,
    /// Meters, on l, w and h.
    pub size: f64,
    /// Radians, on theta.
    pub angle: f64,
}

impl ResidualNoise {
    pub fn is_zero(&self) -> bool {
        self.position == 0.0 && self.size == 0.0 && self.angle == 0.0
    }
}

/// Exact `gt - coarse` residuals plus optional noise, drawn in the order
/// x, y, z, l, w, h, theta. Zero noise draws nothing.
pub fn oracle_residuals<R: Rng + ?Sized>(
    coarse: &Box3D,
    gt: &Box3D,
    noise: &ResidualNoise,
    rng: &mut R,
) -> BoxResiduals {
    let exact = residuals_between(coarse, gt);
    if noise.is_zero() {
        return exact;
    }
    let sigmas = [
        noise.position,
        noise.position,
        noise.position,
        noise.size,
        noise.size,
        noise.size,
        noise.angle,
    ];
    let mut a = exact.as_array();
    for (v, s) in a.iter_mut().zip(sigmas) {
        let n: f64 = rng.sample(StandardNormal);
        *v += s.abs() * n;
    }
    BoxResiduals::from_array(a)
}
