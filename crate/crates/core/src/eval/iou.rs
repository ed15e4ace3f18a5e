//! Rotated bird's-eye-view and 3D intersection over union.

use alloc::vec::Vec;

use crate::geometry::Box3D;

type P2 = (f64, f64);

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Shoelace signed area; positive for counter-clockwise order.
pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * s
}

fn line_intersection(p: P2, q: P2, a: P2, b: P2) -> P2 {
    // point on segment p-q crossing the infinite line a-b
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

/// Sutherland-Hodgman clipping of `subject` by the convex, counter-clockwise
/// polygon `clip`.
pub fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut output: Vec<P2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let input = core::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn ccw_footprint(b: &Box3D) -> [P2; 4] {
    let mut f = b.footprint();
    if signed_area(&f) < 0.0 {
        f.reverse();
    }
    f
}

/// Area of the intersection of the two yaw-rotated `l x w` footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let fa = ccw_footprint(a);
    let fb = ccw_footprint(b);
    signed_area(&clip_convex(&fa, &fb)).max(0.0)
}

fn ratio(inter: f64, union: f64) -> f64 {
    if !(union > 0.0) || !inter.is_finite() {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn rotated_iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    ratio(inter, a.l * a.w + b.l * b.w - inter)
}

/// Overlap of the vertical extents `[y - h, y]` (Y points down).
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let top = (a.y - a.h).max(b.y - b.h);
    let bottom = a.y.min(b.y);
    (bottom - top).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b) * vertical_overlap(a, b);
    ratio(inter, a.volume() + b.volume() - inter)
}
