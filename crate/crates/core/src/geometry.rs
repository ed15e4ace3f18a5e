//! Pinhole projection and the box / cuboid / structured-polygon mappings.
//!
//! Coordinates follow the KITTI rectified camera frame: X right, Y down,
//! Z forward. A [`Box3D`] is anchored at the center of its bottom face and
//! rotated by `theta` about the camera Y axis (KITTI `rotation_y`).
//!
//! # Vertex indexing
//!
//! Vertices are stored 0-based but named P1..P8 throughout the docs:
//!
//! ```text
//!        P1 -------- P4          top face    (Y = y - h)
//!       /|          /|
//!     P5 -------- P8 |
//!      | P2 ------|- P3          bottom face (Y = y)
//!      |/         |/
//!     P6 -------- P7
//! ```
//!
//! * bottom face cycle P2 -> P3 -> P7 -> P6, diagonals P2P7 and P3P6 cross at
//!   the box location;
//! * top face cycle P1 -> P4 -> P8 -> P5;
//! * vertical edges (P1,P2), (P4,P3), (P5,P6), (P8,P7);
//! * length edges (P2,P3), (P6,P7), (P1,P4), (P5,P8), all parallel to the
//!   length axis `(cos theta, 0, -sin theta)`, with P2, P6, P1, P5 at the
//!   positive end;
//! * width edges (P2,P6), (P3,P7), (P1,P5), (P4,P8), with P2, P3, P1, P4 at
//!   the positive end of the width axis `(sin theta, 0, cos theta)`.

use core::ops::{Add, Mul, Sub};

use crate::math::{atan2, cos, normalize_angle, sin, sqrt};
use crate::{Error, Result};

/// Vertical edges as `(top, bottom)` vertex indices.
pub const VERTICAL_EDGES: [(usize, usize); 4] = [(0, 1), (3, 2), (4, 5), (7, 6)];
/// Length edges as `(positive end, negative end)`.
pub const LENGTH_EDGES: [(usize, usize); 4] = [(1, 2), (5, 6), (0, 3), (4, 7)];
/// Width edges as `(positive end, negative end)`.
pub const WIDTH_EDGES: [(usize, usize); 4] = [(1, 5), (2, 6), (0, 4), (3, 7)];
/// The two bottom-face diagonals whose midpoints give the box location.
pub const BOTTOM_DIAGONALS: [(usize, usize); 2] = [(1, 6), (2, 5)];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point3) -> Point3 {
        Point3::new(
            0.5 * (self.x + other.x),
            0.5 * (self.y + other.y),
            0.5 * (self.z + other.z),
        )
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Image coordinates in pixels; `u` grows rightwards, `v` downwards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(self, other: Pixel) -> f64 {
        crate::math::hypot(self.u - other.u, self.v - other.v)
    }
}

/// Pinhole camera with an optional projection translation column.
///
/// The projection matrix is
///
/// ```text
/// [ fx  0  cu  tx ]
/// [  0 fy  cv  ty ]
/// [  0  0   1  tz ]
/// ```
///
/// which is the layout of a KITTI `P2` row. With `tx = ty = tz = 0` this is
/// the plain intrinsic matrix `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cu: f64,
    pub cv: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cu: f64, cv: f64) -> Result<Self> {
        Self::with_translation(fx, fy, cu, cv, 0.0, 0.0, 0.0)
    }

    /// Square-pixel shorthand.
    pub fn simple(f: f64, cu: f64, cv: f64) -> Result<Self> {
        Self::new(f, f, cu, cv)
    }

    pub fn with_translation(
        fx: f64,
        fy: f64,
        cu: f64,
        cv: f64,
        tx: f64,
        ty: f64,
        tz: f64,
    ) -> Result<Self> {
        if !(fx > 0.0 && fx.is_finite()) {
            return Err(Error::InvalidIntrinsics("fx must be positive"));
        }
        if !(fy > 0.0 && fy.is_finite()) {
            return Err(Error::InvalidIntrinsics("fy must be positive"));
        }
        if ![cu, cv, tx, ty, tz].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite entry"));
        }
        Ok(Self { fx, fy, cu, cv, tx, ty, tz })
    }

    /// Reads a 3x4 projection matrix. Skewed or otherwise non-pinhole
    /// matrices are rejected.
    pub fn from_projection(p: &[[f64; 4]; 3]) -> Result<Self> {
        if p[0][1] != 0.0 || p[1][0] != 0.0 {
            return Err(Error::InvalidIntrinsics("skew terms are not supported"));
        }
        if p[2][0] != 0.0 || p[2][1] != 0.0 || p[2][2] != 1.0 {
            return Err(Error::InvalidIntrinsics("third row must be [0 0 1 tz]"));
        }
        Self::with_translation(p[0][0], p[1][1], p[0][2], p[1][2], p[0][3], p[1][3], p[2][3])
    }

    pub fn projection_matrix(&self) -> [[f64; 4]; 3] {
        [
            [self.fx, 0.0, self.cu, self.tx],
            [0.0, self.fy, self.cv, self.ty],
            [0.0, 0.0, 1.0, self.tz],
        ]
    }

    /// Homogeneous scale of the projection of a point at camera depth `z`.
    #[inline]
    pub fn projective_depth(&self, z: f64) -> f64 {
        z + self.tz
    }

    /// Projects a camera-frame point.
    pub fn project(&self, p: Point3) -> Result<Pixel> {
        let w = self.projective_depth(p.z);
        if !(p.z > 0.0 && w > 0.0) {
            return Err(Error::NonPositiveDepth { depth: p.z });
        }
        Ok(Pixel::new(
            (self.fx * p.x + self.cu * p.z + self.tx) / w,
            (self.fy * p.y + self.cv * p.z + self.ty) / w,
        ))
    }

    /// Lifts a pixel to the camera-frame point at depth `z`; exact inverse of
    /// [`project`](Self::project).
    pub fn backproject(&self, px: Pixel, z: f64) -> Result<Point3> {
        let w = self.projective_depth(z);
        if !(z > 0.0 && w > 0.0) {
            return Err(Error::NonPositiveDepth { depth: z });
        }
        Ok(Point3::new(
            (px.u * w - self.cu * z - self.tx) / self.fx,
            (px.v * w - self.cv * z - self.ty) / self.fy,
            z,
        ))
    }
}

/// Seven-parameter box: bottom-center location, size and yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Box3D {
    /// Validates the dimensions and wraps `theta` into `(-pi, pi]`.
    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        for (name, value) in [("l", l), ("w", w), ("h", h)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidDimension { name, value });
            }
        }
        for (name, value) in [("x", x), ("y", y), ("z", z), ("theta", theta)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(Self { x, y, z, l, w, h, theta: normalize_angle(theta) })
    }

    pub fn location(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    /// Unit length axis in the X-Z plane as `(dx, dz)`.
    pub fn length_axis(&self) -> (f64, f64) {
        (cos(self.theta), -sin(self.theta))
    }

    /// Footprint corners in the X-Z plane as `(x, z)`, ordered like the
    /// bottom face P2, P3, P7, P6.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let (c, s) = (cos(self.theta), sin(self.theta));
        let (hl, hw) = (0.5 * self.l, 0.5 * self.w);
        let corner = |sl: f64, sw: f64| {
            (
                self.x + sl * hl * c + sw * hw * s,
                self.z - sl * hl * s + sw * hw * c,
            )
        };
        [corner(1.0, 1.0), corner(-1.0, 1.0), corner(-1.0, -1.0), corner(1.0, -1.0)]
    }

    pub fn cuboid(&self) -> Cuboid {
        let [p2, p3, p7, p6] = self.footprint();
        let bottom = self.y;
        let top = self.y - self.h;
        let at = |(x, z): (f64, f64), y: f64| Point3::new(x, y, z);
        Cuboid {
            vertices: [
                at(p2, top),
                at(p2, bottom),
                at(p3, bottom),
                at(p3, top),
                at(p6, top),
                at(p6, bottom),
                at(p7, bottom),
                at(p7, top),
            ],
        }
    }
}

/// The eight vertices of a box, in the canonical order described in the
/// module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub vertices: [Point3; 8],
}

impl Cuboid {
    pub fn translated(&self, offset: Point3) -> Cuboid {
        Cuboid { vertices: self.vertices.map(|p| p + offset) }
    }

    /// Averages the cuboid back into a [`Box3D`].
    ///
    /// Location is the mean of the midpoints of the two bottom diagonals,
    /// each dimension the mean of its four edge lengths, and the yaw comes
    /// from the mean of the four unit length-edge directions. On a cuboid
    /// produced by [`Box3D::cuboid`] this reproduces the box.
    pub fn to_box(&self) -> Result<Box3D> {
        let v = &self.vertices;
        if v.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::DegenerateCuboid("non-finite vertex"));
        }
        let [(a0, a1), (b0, b1)] = BOTTOM_DIAGONALS;
        let location = v[a0].midpoint(v[a1]).midpoint(v[b0].midpoint(v[b1]));

        let mean_len =
            |edges: &[(usize, usize); 4]| edges.iter().map(|&(i, j)| v[i].distance(v[j])).sum::<f64>() / 4.0;
        let l = mean_len(&LENGTH_EDGES);
        let w = mean_len(&WIDTH_EDGES);
        let h = mean_len(&VERTICAL_EDGES);

        let mut dir = Point3::default();
        for &(head, tail) in &LENGTH_EDGES {
            let d = v[head] - v[tail];
            let n = d.norm();
            if n == 0.0 {
                return Err(Error::DegenerateCuboid("zero-length length edge"));
            }
            dir = dir + d * (1.0 / n);
        }
        if dir.x == 0.0 && dir.z == 0.0 {
            return Err(Error::DegenerateCuboid("length directions cancel out"));
        }
        let theta = atan2(-dir.z, dir.x);

        Box3D::new(location.x, location.y, location.z, l, w, h, theta)
            .map_err(|_| Error::DegenerateCuboid("zero-size edge"))
    }
}

/// Image projections of the eight cuboid vertices, same indexing as
/// [`Cuboid`]. Vertices may lie outside the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredPolygon {
    pub vertices: [Pixel; 8],
}

impl StructuredPolygon {
    /// Axis-aligned enclosing rectangle `[u_min, v_min, u_max, v_max]`.
    pub fn bounding_rect(&self) -> [f64; 4] {
        let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.vertices {
            r[0] = r[0].min(p.u);
            r[1] = r[1].min(p.v);
            r[2] = r[2].max(p.u);
            r[3] = r[3].max(p.v);
        }
        r
    }

    /// Reorders vertices: output index `permutation[k]` takes input vertex `k`.
    pub fn permuted(&self, permutation: &[usize; 8]) -> StructuredPolygon {
        let mut out = self.vertices;
        for (k, &dst) in permutation.iter().enumerate() {
            out[dst] = self.vertices[k];
        }
        StructuredPolygon { vertices: out }
    }
}

pub fn project_vertex(k: &CameraIntrinsics, p: Point3) -> Result<Pixel> {
    k.project(p)
}

pub fn backproject_vertex(k: &CameraIntrinsics, p: Pixel, z: f64) -> Result<Point3> {
    k.backproject(p, z)
}

pub fn box_to_cuboid(b: &Box3D) -> Cuboid {
    b.cuboid()
}

pub fn cuboid_to_box(c: &Cuboid) -> Result<Box3D> {
    c.to_box()
}

/// Projects every cuboid vertex of `b`, keeping indices.
pub fn project_box(k: &CameraIntrinsics, b: &Box3D) -> Result<StructuredPolygon> {
    let cuboid = b.cuboid();
    let mut vertices = [Pixel::default(); 8];
    for (i, (dst, p)) in vertices.iter_mut().zip(cuboid.vertices.iter()).enumerate() {
        *dst = k
            .project(*p)
            .map_err(|_| Error::VertexBehindCamera { vertex: i + 1, depth: p.z })?;
    }
    Ok(StructuredPolygon { vertices })
}
