use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("non-positive depth {depth}")]
    NonPositiveDepth { depth: f64 },
    /// `vertex` is 1-based, matching the P1..P8 naming.
    #[error("vertex P{vertex} is not in front of the camera (depth {depth})")]
    VertexBehindCamera { vertex: usize, depth: f64 },
    #[error("box dimension `{name}` must be positive and finite, got {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("cuboid is degenerate: {0}")]
    DegenerateCuboid(&'static str),
    #[error("projected edge of {pixels} px is shorter than the {min} px minimum")]
    EdgeTooShort { pixels: f64, min: f64 },
    /// `edge` is 1-based: edges (P1,P2), (P4,P3), (P5,P6), (P8,P7).
    #[error("vertical edge {edge} is degenerate ({pixels} px)")]
    DegenerateEdge { edge: usize, pixels: f64 },
    #[error("object height must be positive and finite, got {0}")]
    InvalidHeight(f64),
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("heatmap is empty or malformed: {0}")]
    InvalidHeatmap(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("invalid depth map: {0}")]
    InvalidDepthMap(&'static str),
    #[error("coarse box center ({x}, {z}) lies outside the BEV grid")]
    RoiOutOfRange { x: f64, z: f64 },
    #[error("metric is undefined: {0}")]
    UndefinedMetric(&'static str),
}
