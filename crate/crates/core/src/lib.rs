//! Continuous and discrete penalty-regularized forward-backward dynamics for
//! monotone inclusions `0 in Ax + Dx + N_C(x)` with `C = zer B`.
//!
//! `A` is maximally monotone, `D` cocoercive and `B` a cocoercive penalty
//! whose zero set is the constraint set. The main entry points are
//! [`dynamics::integrate`], [`discrete::iterate`] and the checks in
//! [`diagnostics`].

pub mod discrete;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod quadrature;
pub mod schedules;
pub mod tolerances;

pub use error::{Error, Result};
pub use linalg::{Matrix, Point};
pub use tolerances::Tolerances;
