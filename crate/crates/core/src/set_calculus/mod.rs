//! Compact convex sets with support-function access, Euclidean projection,
//! deviation, Hausdorff distance and Minkowski sums.

mod body;
pub mod directions;
mod hull;
mod metrics;
mod projection;

pub use body::{support, ConvexBody, Direction, Shape, MAX_EXACT_GENERATORS};
pub use hull::convex_hull;
pub use metrics::{
    deviation, hausdorff, hausdorff_report, hausdorff_support, minkowski_sum, Deviation, HausdorffReport, SupportRoute,
};
pub use projection::{dist_point_to_body, project, Projection, PROJECTION_TOL};
