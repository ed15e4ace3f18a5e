//! Synthetic KITTI-style scenes: cars standing on a flat ground plane, seen
//! by the KITTI left color camera, with depth maps rendered by ray casting.

use std::path::Path;

use polydepth_core::bev::DepthMap;
use polydepth_core::eval::bev_intersection_area;
use polydepth_core::geometry::project_box;
use polydepth_core::math::normalize_angle;
use polydepth_core::{Box3D, CameraIntrinsics};
use rand::Rng;

use crate::dataset::{write_file, FrameId, CALIB_DIR, DEPTH_DIR, LABEL_DIR};
use crate::kitti::{encode_depth_png, write_calib, CalibFile, LabelRecord};
use crate::rng::{stage_rng, Stage};
use crate::Result;

/// `P2` of KITTI sequence 2011_09_26.
pub const KITTI_P2: [[f64; 4]; 3] = [
    [721.5377, 0.0, 609.5593, 44.85728],
    [0.0, 721.5377, 172.854, 0.2163791],
    [0.0, 0.0, 1.0, 0.002745884],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub camera: CameraIntrinsics,
    /// Camera-frame Y of the ground plane.
    pub ground_y: f64,
    pub max_objects: usize,
    pub z_range: (f64, f64),
    /// Rendered depth is clipped here; farther pixels are invalid.
    pub max_depth: f64,
}

impl SceneConfig {
    pub fn kitti(seed: u64) -> Self {
        Self {
            seed,
            width: 1242,
            height: 375,
            camera: CameraIntrinsics::from_projection(&KITTI_P2).expect("valid constant"),
            ground_y: 1.65,
            max_objects: 6,
            z_range: (5.0, 50.0),
            max_depth: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub id: FrameId,
    pub labels: Vec<LabelRecord>,
}

impl SyntheticFrame {
    pub fn boxes(&self) -> Vec<Box3D> {
        self.labels.iter().map(|l| l.to_box().expect("generated boxes are valid")).collect()
    }
}

fn inside_image(cfg: &SceneConfig, b: &Box3D) -> Option<[f64; 4]> {
    let poly = project_box(&cfg.camera, b).ok()?;
    let r = poly.bounding_rect();
    let ok = r[0] >= 0.0 && r[1] >= 0.0 && r[2] <= (cfg.width - 1) as f64 && r[3] <= (cfg.height - 1) as f64;
    ok.then_some(r)
}

/// Footprints grown by half a meter must not touch.
fn separated(a: &Box3D, b: &Box3D) -> bool {
    let grow = |q: &Box3D| Box3D { l: q.l + 1.0, w: q.w + 1.0, ..*q };
    bev_intersection_area(&grow(a), &grow(b)) == 0.0
}

/// Cars with every vertex inside the image and disjoint footprints. Each
/// frame draws from its own stream, so frames can be generated in any order.
pub fn generate_frame(cfg: &SceneConfig, index: u32) -> SyntheticFrame {
    let mut rng = stage_rng(cfg.seed, index, Stage::Scene, 0);
    let wanted = rng.random_range(1..=cfg.max_objects.max(1));
    let mut boxes: Vec<(Box3D, [f64; 4])> = Vec::new();
    let mut attempts = 0;
    while boxes.len() < wanted && attempts < 200 {
        attempts += 1;
        let z = rng.random_range(cfg.z_range.0..=cfg.z_range.1);
        let x = rng.random_range(-0.6 * z..=0.6 * z);
        let b = Box3D::new(
            x,
            cfg.ground_y,
            z,
            rng.random_range(3.2..4.6),
            rng.random_range(1.45..1.85),
            rng.random_range(1.35..1.75),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
        .expect("sampled dimensions are positive");
        let Some(rect) = inside_image(cfg, &b) else { continue };
        if boxes.iter().all(|(o, _)| separated(o, &b)) {
            boxes.push((b, rect));
        }
    }
    let labels = boxes
        .iter()
        .map(|(b, rect)| LabelRecord {
            alpha: normalize_angle(b.theta - b.x.atan2(b.z)),
            ..LabelRecord::from_box("Car", b, *rect, None)
        })
        .collect();
    SyntheticFrame { id: FrameId::from_index(index), labels }
}

/// Ray through pixel `(u, v)` parameterized by camera depth: `o + z * d`.
fn pixel_ray(k: &CameraIntrinsics, u: f64, v: f64) -> ([f64; 3], [f64; 3]) {
    (
        [(u * k.tz - k.tx) / k.fx, (v * k.tz - k.ty) / k.fy, 0.0],
        [(u - k.cu) / k.fx, (v - k.cv) / k.fy, 1.0],
    )
}

/// Smallest positive depth at which the ray enters the box, by slab tests in
/// the box frame.
fn ray_box(o: [f64; 3], d: [f64; 3], b: &Box3D) -> Option<f64> {
    let (c, s) = (b.theta.cos(), b.theta.sin());
    let (ox, oz) = (o[0] - b.x, o[2] - b.z);
    // along = dx cos - dz sin, across = dx sin + dz cos, both affine in depth
    let slabs = [
        (ox * c - oz * s, d[0] * c - d[2] * s, -b.l / 2.0, b.l / 2.0),
        (ox * s + oz * c, d[0] * s + d[2] * c, -b.w / 2.0, b.w / 2.0),
        (o[1], d[1], b.y - b.h, b.y),
    ];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (p0, dp, a, bnd) in slabs {
        if dp == 0.0 {
            if p0 < a || p0 > bnd {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((a - p0) / dp, (bnd - p0) / dp);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    (lo <= hi && lo > 0.0).then_some(lo)
}

/// Per-pixel depth of the nearest surface among the ground plane and the
/// boxes (sampled at integer pixel coordinates). Misses read as 0.
pub fn render_depth(cfg: &SceneConfig, boxes: &[Box3D]) -> DepthMap {
    let k = &cfg.camera;
    let (w, h) = (cfg.width, cfg.height);
    let mut data = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let (o, d) = pixel_ray(k, u as f64, v as f64);
            if d[1] > 0.0 {
                let z = (cfg.ground_y - o[1]) / d[1];
                if z > 0.0 && z <= cfg.max_depth {
                    data[v * w + u] = z;
                }
            }
        }
    }
    for b in boxes {
        let Ok(poly) = project_box(k, b) else { continue };
        let r = poly.bounding_rect();
        let u0 = r[0].floor().max(0.0) as usize;
        let v0 = r[1].floor().max(0.0) as usize;
        let u1 = (r[2].ceil().max(0.0) as usize).min(w - 1);
        let v1 = (r[3].ceil().max(0.0) as usize).min(h - 1);
        for v in v0..=v1 {
            for u in u0..=u1 {
                let (o, d) = pixel_ray(k, u as f64, v as f64);
                if let Some(z) = ray_box(o, d, b) {
                    let cell = &mut data[v * w + u];
                    if z <= cfg.max_depth && (*cell == 0.0 || z < *cell) {
                        *cell = z;
                    }
                }
            }
        }
    }
    DepthMap::new(w, h, data).expect("rendered depths are finite")
}

/// Writes `calib/`, `label_2/`, optionally `depth/`, and `split.txt`.
pub fn write_dataset(cfg: &SceneConfig, frames: u32, root: &Path, with_depth: bool) -> Result<()> {
    let calib = write_calib(&CalibFile::from_intrinsics(cfg.camera));
    let mut split = String::new();
    for i in 0..frames {
        let f = generate_frame(cfg, i);
        write_file(&root.join(CALIB_DIR).join(format!("{}.txt", f.id.name)), &calib)?;
        write_file(
            &root.join(LABEL_DIR).join(format!("{}.txt", f.id.name)),
            crate::kitti::write_labels(&f.labels),
        )?;
        if with_depth {
            let png = encode_depth_png(&render_depth(cfg, &f.boxes()))?;
            write_file(&root.join(DEPTH_DIR).join(format!("{}.png", f.id.name)), png)?;
        }
        split.push_str(&f.id.name);
        split.push('\n');
    }
    write_file(&root.join("split.txt"), split)
}
