//! Axis-aligned rectangles over the unit cube and kd-tree rectangular
//! partitions with intersection, refinement, shifting, point location,
//! and sibling merging.

mod partition;
mod rect;

pub use partition::{intersect, intersect_map, KdPartition, LeafStats, LeafView, Leaves};
pub use rect::Rect;

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("interval out of [0, 1] at dim {dim}: [{low}, {high}]")]
    OutOfCube { dim: usize, low: f64, high: f64 },
    #[error("empty or inverted interval at dim {dim}: [{low}, {high}]")]
    EmptyInterval { dim: usize, low: f64, high: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("coordinate {value} at dim {dim} outside [0, 1]")]
    PointOutOfDomain { dim: usize, value: f64 },
    #[error("piece {index} overlaps an earlier piece")]
    OverlappingPieces { index: usize },
    #[error("pieces leave a gap around {rect}")]
    CoverageGap { rect: String },
}
