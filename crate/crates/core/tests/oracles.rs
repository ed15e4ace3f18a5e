//! Implementation-independent oracles: Monte-Carlo areas, brute-force
//! precision/recall enumeration and error-propagation models.

#![allow(clippy::approx_constant)]

use std::f64::consts::{FRAC_PI_4, PI};

use polydepth_core::depth::{recover_coarse_box, DepthConfig};
use polydepth_core::eval::{average_precision, rotated_iou_bev, ApOptions, Detection, Difficulty, GroundTruth};
use polydepth_core::geometry::project_box;
use polydepth_core::heatmap::oracle_polygon;
use polydepth_core::{Box3D, CameraIntrinsics, Cuboid, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Point-in-footprint test in the box frame, written without the library's
/// corner construction.
fn inside(b: &Box3D, x: f64, z: f64) -> bool {
    let (dx, dz) = (x - b.x, z - b.z);
    // length axis (cos t, -sin t), width axis (sin t, cos t)
    let along = dx * b.theta.cos() - dz * b.theta.sin();
    let across = dx * b.theta.sin() + dz * b.theta.cos();
    along.abs() <= b.l / 2.0 && across.abs() <= b.w / 2.0
}

fn monte_carlo_iou(a: &Box3D, b: &Box3D, samples: usize, rng: &mut impl Rng) -> f64 {
    let ra = 0.5 * a.l.hypot(a.w);
    let rb = 0.5 * b.l.hypot(b.w);
    let x0 = (a.x - ra).min(b.x - rb);
    let x1 = (a.x + ra).max(b.x + rb);
    let z0 = (a.z - ra).min(b.z - rb);
    let z1 = (a.z + ra).max(b.z + rb);
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.random_range(x0..x1);
        let z = rng.random_range(z0..z1);
        let (ia, ib) = (inside(a, x, z), inside(b, x, z));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

#[test]
fn rotated_square_matches_area_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let a = Box3D::new(0.0, 1.0, 10.0, 1.0, 1.0, 1.0, 0.0).unwrap();
    let b = Box3D { theta: FRAC_PI_4, ..a };
    let mc = monte_carlo_iou(&a, &b, 1_000_000, &mut rng);
    assert!((mc - 0.7071).abs() < 0.005, "mc {mc}");
    assert!((rotated_iou_bev(&a, &b) - mc).abs() < 0.005);
}

#[test]
fn random_pairs_match_area_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let a = Box3D::new(
            rng.random_range(-2.0..2.0),
            1.6,
            rng.random_range(10.0..14.0),
            rng.random_range(2.0..5.0),
            rng.random_range(1.0..2.5),
            1.5,
            rng.random_range(-PI..PI),
        )
        .unwrap();
        let b = Box3D::new(
            a.x + rng.random_range(-1.5..1.5),
            1.6,
            a.z + rng.random_range(-1.5..1.5),
            rng.random_range(2.0..5.0),
            rng.random_range(1.0..2.5),
            1.5,
            rng.random_range(-PI..PI),
        )
        .unwrap();
        let mc = monte_carlo_iou(&a, &b, 200_000, &mut rng);
        let iou = rotated_iou_bev(&a, &b);
        assert!((iou - mc).abs() < 0.01, "{iou} vs {mc} for {a:?} {b:?}");
    }
}

/// Precision/recall by brute force: for every cutoff on the ranked list,
/// recount matches from scratch.
fn brute_force_ap(ranked_hits: &[bool], n_gt: usize) -> f64 {
    let mut points = Vec::new();
    for cut in 1..=ranked_hits.len() {
        let tp = ranked_hits[..cut].iter().filter(|h| **h).count();
        points.push((tp as f64 / cut as f64, tp as f64 / n_gt as f64));
    }
    let mut sum = 0.0;
    for k in 0..=10 {
        let r = k as f64 / 10.0;
        let best = points
            .iter()
            .filter(|(_, rec)| *rec >= r - 1e-12)
            .map(|(p, _)| *p)
            .fold(0.0, f64::max);
        sum += best;
    }
    sum / 11.0
}

#[test]
fn hand_fixture_matches_closed_form_and_enumeration() {
    let expected = (6.0 + 5.0 * (2.0 / 3.0)) / 11.0;
    assert!((brute_force_ap(&[true, false, true], 2) - expected).abs() < 1e-12);
    assert!((expected - 0.8485).abs() < 5e-5);
}

#[test]
fn ap_matches_enumeration_on_random_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n_gt = rng.random_range(1..8usize);
        let n_fp = rng.random_range(0..8usize);
        let n_tp = rng.random_range(0..=n_gt);
        // one frame per ground truth so matching is unambiguous
        let gts: Vec<GroundTruth> = (0..n_gt as u32)
            .map(|i| GroundTruth {
                frame: i,
                id: 0,
                class: "Car".into(),
                box3d: Box3D::new(0.0, 1.6, 20.0, 4.0, 1.8, 1.5, 0.0).unwrap(),
                bbox2d: [0.0, 0.0, 60.0, 50.0],
                occlusion: 0,
                truncation: 0.0,
            })
            .collect();
        let mut dets = Vec::new();
        let mut ranked: Vec<(f64, bool)> = Vec::new();
        for i in 0..n_tp {
            let s: f64 = rng.random();
            dets.push(Detection { frame: i as u32, id: 0, box3d: gts[i].box3d, score: s, bbox2d: None });
            ranked.push((s, true));
        }
        for i in 0..n_fp {
            let s: f64 = rng.random();
            let far = Box3D::new(-15.0, 1.6, 40.0, 4.0, 1.8, 1.5, 0.0).unwrap();
            dets.push(Detection { frame: (i % n_gt) as u32, id: 1 + i as u32, box3d: far, score: s, bbox2d: None });
            ranked.push((s, false));
        }
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let hits: Vec<bool> = ranked.iter().map(|r| r.1).collect();
        let oracle = brute_force_ap(&hits, n_gt);
        let ap = average_precision(&dets, &gts, rotated_iou_bev, 0.7, Difficulty::Hard, &ApOptions::default()).unwrap();
        assert!((ap - oracle).abs() < 1e-12, "{ap} vs {oracle} for {hits:?} / {n_gt}");
    }
}

#[test]
fn noisy_cuboid_averages_are_unbiased() {
    let b = Box3D::new(1.0, 1.6, 20.0, 4.0, 1.8, 1.5, 0.6).unwrap();
    let clean = b.cuboid();
    let sigma = 0.01;
    let trials = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sums = [0.0f64; 7];
    let mut sq = [0.0f64; 7];
    for _ in 0..trials {
        let noisy = Cuboid {
            vertices: clean.vertices.map(|p| {
                let n = |r: &mut ChaCha8Rng| sigma * r.sample::<f64, _>(StandardNormal);
                p + Point3::new(n(&mut rng), n(&mut rng), n(&mut rng))
            }),
        };
        let r = noisy.to_box().unwrap();
        let err = [r.x - b.x, r.y - b.y, r.z - b.z, r.l - b.l, r.w - b.w, r.h - b.h, r.theta - b.theta];
        for i in 0..7 {
            sums[i] += err[i];
            sq[i] += err[i] * err[i];
        }
    }
    for i in 0..7 {
        let mean = sums[i] / trials as f64;
        let sd = (sq[i] / trials as f64 - mean * mean).sqrt();
        let se = sd / (trials as f64).sqrt();
        assert!(mean.abs() < 4.0 * se + 1e-4, "param {i}: mean {mean}, se {se}");
    }
}

#[test]
fn box_depth_error_follows_first_order_model() {
    // Per-edge depth error has sd Z^2 * sqrt(2) * sigma / (f H); the box z is the
    // mean of four independent edges, halving it.
    let k = CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap();
    let (sigma, f, height, z) = (0.5, 700.0, 1.46, 20.0);
    let b = Box3D::new(0.0, 1.65, z, 3.9, 1.6, height, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let trials = 10_000;
    let mut sum = 0.0;
    for _ in 0..trials {
        let est = oracle_polygon(&k, &b, sigma, &mut rng).unwrap();
        let rec = recover_coarse_box(&k, &est.polygon, height, &DepthConfig::default()).unwrap();
        sum += (rec.box3d.z - z).abs();
    }
    let empirical = sum / trials as f64;
    let per_edge_sd = z * z * 2f64.sqrt() * sigma / (f * height);
    let model = 0.5 * per_edge_sd * (2.0 / PI).sqrt();
    assert!((empirical - model).abs() < 0.2 * model, "{empirical} vs {model}");
}

#[test]
fn exact_pipeline_has_zero_depth_error() {
    let k = CameraIntrinsics::simple(700.0, 600.0, 180.0).unwrap();
    let b = Box3D::new(-2.0, 1.65, 33.0, 4.2, 1.7, 1.5, 2.0).unwrap();
    let poly = project_box(&k, &b).unwrap();
    let rec = recover_coarse_box(&k, &poly, b.h, &DepthConfig::default()).unwrap();
    assert!((rec.box3d.z - b.z).abs() < 1e-6);
}
