//! Height-guided depth recovery.
//!
//! A vertical cuboid edge of physical height `H` at projective depth `Z`
//! projects to `h = f * H / Z` pixels, so each of the four vertical edges of a
//! structured polygon yields its own depth `Z = f * H / h`. Back-projecting
//! both vertices of every edge at that depth and averaging the resulting
//! cuboid gives the coarse box.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{CameraIntrinsics, Cuboid, Point3, StructuredPolygon, VERTICAL_EDGES};
use crate::math::{exp, ln};
use crate::{Box3D, Error, Result};

/// Mean car height used as the default prior, in meters.
pub const CAR_MEAN_HEIGHT: f64 = 1.46;

/// Projected edges shorter than this (in pixels) are treated as unusable.
pub const DEFAULT_MIN_EDGE_PX: f64 = 2.0;

/// Dataset-average object height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightPrior {
    mean_height: f64,
}

impl HeightPrior {
    pub fn new(mean_height: f64) -> Result<Self> {
        if !(mean_height > 0.0 && mean_height.is_finite()) {
            return Err(Error::InvalidHeight(mean_height));
        }
        Ok(Self { mean_height })
    }

    pub fn mean_height(&self) -> f64 {
        self.mean_height
    }
}

impl Default for HeightPrior {
    fn default() -> Self {
        Self { mean_height: CAR_MEAN_HEIGHT }
    }
}

/// Which focal length converts pixel heights into depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FocalAxis {
    #[default]
    Fx,
    Fy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthConfig {
    pub min_edge_px: f64,
    pub focal: FocalAxis,
}

impl Default for DepthConfig {
    fn default() -> Self {
        Self { min_edge_px: DEFAULT_MIN_EDGE_PX, focal: FocalAxis::Fx }
    }
}

impl DepthConfig {
    pub fn focal_length(&self, k: &CameraIntrinsics) -> f64 {
        match self.focal {
            FocalAxis::Fx => k.fx,
            FocalAxis::Fy => k.fy,
        }
    }
}

/// Camera-frame depth of each vertical edge, edges ordered
/// (P1,P2), (P4,P3), (P5,P6), (P8,P7).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeDepths(pub [f64; 4]);

/// Pixel length of each vertical edge of the polygon.
pub fn edge_pixel_heights(p: &StructuredPolygon) -> [f64; 4] {
    VERTICAL_EDGES.map(|(top, bottom)| p.vertices[top].distance(p.vertices[bottom]))
}

/// `f * H / h`, refusing edges shorter than `min_edge_px`.
pub fn depth_from_height(focal: f64, height: f64, pixel_height: f64, min_edge_px: f64) -> Result<f64> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::InvalidHeight(height));
    }
    if !(focal > 0.0 && focal.is_finite()) {
        return Err(Error::InvalidParameter { name: "focal", value: focal });
    }
    if !(pixel_height >= min_edge_px) || pixel_height <= 0.0 {
        return Err(Error::EdgeTooShort { pixels: pixel_height, min: min_edge_px });
    }
    Ok(focal * height / pixel_height)
}

/// Log-ratio regression target `ln(G_H / A_H)`.
pub fn encode_height(height: f64, prior: &HeightPrior) -> Result<f64> {
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::InvalidHeight(height));
    }
    Ok(ln(height / prior.mean_height))
}

pub fn decode_height(t_h: f64, prior: &HeightPrior) -> f64 {
    prior.mean_height * exp(t_h)
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Ground-truth height perturbed by log-normal noise: `H * exp(sigma * n)`.
pub fn oracle_height<R: Rng + ?Sized>(gt_height: f64, sigma: f64, rng: &mut R) -> Result<f64> {
    if !(gt_height > 0.0 && gt_height.is_finite()) {
        return Err(Error::InvalidHeight(gt_height));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter { name: "sigma_height", value: sigma });
    }
    if sigma == 0.0 {
        return Ok(gt_height);
    }
    let n: f64 = rng.sample(StandardNormal);
    Ok(gt_height * exp(sigma * n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseRecovery {
    pub box3d: Box3D,
    pub cuboid: Cuboid,
    pub edge_depths: EdgeDepths,
    pub edge_pixel_heights: [f64; 4],
}

/// Recovers a coarse box from a structured polygon and an object height.
///
/// Each vertical edge gets its own depth; both of its vertices are
/// back-projected at that depth and the resulting cuboid is averaged with
/// [`Cuboid::to_box`]. The four depths are not smoothed against each other.
pub fn recover_coarse_box(
    k: &CameraIntrinsics,
    polygon: &StructuredPolygon,
    height: f64,
    config: &DepthConfig,
) -> Result<CoarseRecovery> {
    let focal = config.focal_length(k);
    let heights = edge_pixel_heights(polygon);
    let mut depths = [0.0; 4];
    let mut vertices = [Point3::default(); 8];
    for (j, &(top, bottom)) in VERTICAL_EDGES.iter().enumerate() {
        let projective = depth_from_height(focal, height, heights[j], config.min_edge_px).map_err(|e| match e {
            Error::EdgeTooShort { pixels, .. } => Error::DegenerateEdge { edge: j + 1, pixels },
            other => other,
        })?;
        let z = projective - k.tz;
        if !(z > 0.0) {
            return Err(Error::NonPositiveDepth { depth: z });
        }
        depths[j] = z;
        vertices[top] = k.backproject(polygon.vertices[top], z)?;
        vertices[bottom] = k.backproject(polygon.vertices[bottom], z)?;
    }
    let cuboid = Cuboid { vertices };
    Ok(CoarseRecovery {
        box3d: cuboid.to_box()?,
        cuboid,
        edge_depths: EdgeDepths(depths),
        edge_pixel_heights: heights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_box, Pixel};
    use core::f64::consts::E;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap()
    }

    fn polygon_with_edge(top: Pixel, bottom: Pixel) -> StructuredPolygon {
        let mut vertices = [Pixel::new(0.0, 0.0); 8];
        vertices[0] = top;
        vertices[1] = bottom;
        StructuredPolygon { vertices }
    }

    #[test]
    fn edge_heights_examples() {
        let p = polygon_with_edge(Pixel::new(100.0, 50.0), Pixel::new(100.0, 123.0));
        let h = edge_pixel_heights(&p);
        assert_eq!(h[0], 73.0);
        assert_eq!(h[1], 0.0);
    }

    #[test]
    fn edge_heights_from_forward_projection() {
        // (P1,P2) sits on the principal plane X = 0 at Z = 14
        let b = Box3D::new(-2.0, 1.0, 14.0 - 0.9, 4.0, 1.8, 1.46, 0.0).unwrap();
        let c = b.cuboid();
        assert_eq!(c.vertices[1].x, 0.0);
        assert_eq!(c.vertices[1].z, 14.0);
        let h = edge_pixel_heights(&project_box(&k(), &b).unwrap());
        assert!((h[0] - 73.0).abs() < 1e-9);
        for (j, &(_, bottom)) in VERTICAL_EDGES.iter().enumerate() {
            assert!((h[j] - 700.0 * 1.46 / c.vertices[bottom].z).abs() < 1e-9);
        }
    }

    #[test]
    fn depth_from_height_examples() {
        assert!((depth_from_height(700.0, 1.46, 73.0, 2.0).unwrap() - 14.0).abs() < 1e-12);
        assert!((depth_from_height(700.0, 1.46, 102.2, 2.0).unwrap() - 10.0).abs() < 1e-12);
        let z1 = depth_from_height(700.0, 1.46, 40.0, 2.0).unwrap();
        let z2 = depth_from_height(700.0, 1.46, 80.0, 2.0).unwrap();
        assert_eq!(z1, 2.0 * z2);
    }

    #[test]
    fn depth_from_height_rejects_short_edges() {
        assert!(matches!(depth_from_height(700.0, 1.46, 1.9, 2.0), Err(Error::EdgeTooShort { .. })));
        assert!(depth_from_height(700.0, 1.46, 0.0, 0.0).is_err());
        assert!(depth_from_height(700.0, 1.46, f64::NAN, 2.0).is_err());
        assert!(depth_from_height(700.0, 0.0, 50.0, 2.0).is_err());
    }

    #[test]
    fn height_encoding_examples() {
        let prior = HeightPrior::default();
        assert_eq!(encode_height(1.46, &prior).unwrap(), 0.0);
        assert!((encode_height(1.46 * E, &prior).unwrap() - 1.0).abs() < 1e-12);
        assert!(encode_height(0.0, &prior).is_err());
        assert_eq!(decode_height(0.0, &prior), 1.46);
        assert!((decode_height(1.0, &prior) - 3.9687).abs() < 5e-5);
        assert!((decode_height(-0.1, &prior) - 1.3211).abs() < 5e-5);
        assert!(HeightPrior::new(-1.0).is_err());
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1(0.0), 0.0);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        assert_eq!(smooth_l1(-2.0), 1.5);
    }

    #[test]
    fn smooth_l1_is_c1_at_branch_point() {
        let eps = 1e-7;
        for &s in &[1.0, -1.0] {
            let below = smooth_l1(s * (1.0 - eps));
            let above = smooth_l1(s * (1.0 + eps));
            assert!((below - above).abs() < 1e-6);
            assert!((smooth_l1(s * 1.0) - 0.5).abs() < 1e-12);
            // one-sided slopes from each branch
            let h = 1e-6;
            let left = (smooth_l1(s * 1.0) - smooth_l1(s * (1.0 - h))) / h;
            let right = (smooth_l1(s * (1.0 + h)) - smooth_l1(s * 1.0)) / h;
            assert!((left - right).abs() < 1e-5, "{left} {right}");
        }
    }

    #[test]
    fn recovers_noiseless_box() {
        let b = Box3D::new(0.0, 1.0, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let poly = project_box(&k(), &b).unwrap();
        let r = recover_coarse_box(&k(), &poly, 1.46, &DepthConfig::default()).unwrap().box3d;
        for (a, e) in [(r.x, b.x), (r.y, b.y), (r.z, b.z), (r.l, b.l), (r.w, b.w), (r.h, b.h), (r.theta, b.theta)] {
            assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
    }

    #[test]
    fn recovered_depth_scales_with_height() {
        let b = Box3D::new(0.0, 1.0, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let poly = project_box(&k(), &b).unwrap();
        let cfg = DepthConfig::default();
        let base = recover_coarse_box(&k(), &poly, 1.46, &cfg).unwrap();
        let scaled = recover_coarse_box(&k(), &poly, 1.46 * 1.3, &cfg).unwrap();
        assert!((scaled.box3d.z - 1.3 * base.box3d.z).abs() < 1e-9);
        for j in 0..4 {
            assert!((scaled.edge_depths.0[j] - 1.3 * base.edge_depths.0[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn recovery_with_translation_column_is_exact() {
        let cam = CameraIntrinsics::with_translation(
            721.5377, 721.5377, 609.5593, 172.854, 44.85728, 0.2163791, 0.002745884,
        )
        .unwrap();
        let b = Box3D::new(-3.1, 1.7, 23.0, 3.8, 1.6, 1.52, -2.2).unwrap();
        let poly = project_box(&cam, &b).unwrap();
        let r = recover_coarse_box(&cam, &poly, b.h, &DepthConfig::default()).unwrap().box3d;
        assert!((r.z - b.z).abs() < 1e-9 && (r.x - b.x).abs() < 1e-9 && (r.theta - b.theta).abs() < 1e-9);
    }

    #[test]
    fn degenerate_edge_is_reported_with_index() {
        let b = Box3D::new(0.0, 1.0, 14.0, 4.0, 1.8, 1.46, 0.3).unwrap();
        let mut poly = project_box(&k(), &b).unwrap();
        poly.vertices[4] = poly.vertices[5];
        match recover_coarse_box(&k(), &poly, 1.46, &DepthConfig::default()) {
            Err(Error::DegenerateEdge { edge, pixels }) => {
                assert_eq!(edge, 3);
                assert_eq!(pixels, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depth_decreases_with_pixel_height() {
        let mut last = f64::INFINITY;
        for i in 2..200 {
            let z = depth_from_height(700.0, 1.46, i as f64, 2.0).unwrap();
            assert!(z < last);
            last = z;
        }
    }
}
