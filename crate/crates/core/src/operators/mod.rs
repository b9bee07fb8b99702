//! Operator toolkit: convex sets, resolvents, Yosida approximations,
//! cocoercive forward maps, penalty operators and Fitzpatrick gap bounds.
//!
//! Descriptors are immutable once constructed; every evaluation is a pure
//! function of its inputs.

mod forward;
mod graph;
mod monotone;
mod sets;

pub use forward::{
    check_cocoercive, fitzpatrick_gap_bound, uniform_pairs, Cocoercive, CocoerciveKind, CocoerciveReport,
    ForwardOperator, Penalty, PenaltyKind,
};
pub use graph::{GraphPoint, GraphPointCheck};
pub use monotone::{soft_threshold, MaxMonotone, MonotoneKind};
pub use sets::{ConvexSet, SetKind};

use crate::error::Result;
use crate::linalg::Point;

pub fn project(set: &ConvexSet, x: &Point) -> Result<Point> {
    set.project(x)
}

pub fn resolvent(a: &MaxMonotone, lambda: f64, x: &Point) -> Result<Point> {
    a.resolvent(lambda, x)
}

pub fn yosida(a: &MaxMonotone, alpha: f64, x: &Point) -> Result<Point> {
    a.yosida(alpha, x)
}

pub fn eval_forward(op: &dyn ForwardOperator, x: &Point) -> Result<Point> {
    op.apply(x)
}

pub fn support_function(set: &ConvexSet, u: &Point) -> Result<f64> {
    set.support(u)
}
