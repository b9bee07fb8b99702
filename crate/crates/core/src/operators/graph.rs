use rand::Rng;

use super::forward::{Cocoercive, ForwardOperator};
use super::monotone::MaxMonotone;
use super::sets::ConvexSet;
use crate::error::Result;
use crate::linalg::{check_dim, Point};

/// A point `(z, w)` of the graph of `A + D + N_C` together with its
/// decomposition `w = v + p + Dz`, `v in Az`, `p in N_C(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoint {
    pub z: Point,
    pub v: Point,
    pub p: Point,
    pub w: Point,
}

/// Residuals of the graph-point invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPointCheck {
    /// `||J_A(z + v) - z||`.
    pub resolvent_residual: f64,
    pub normal_certified: bool,
    /// `||w - (v + p + Dz)||`.
    pub decomposition_residual: f64,
    pub valid: bool,
}

impl GraphPoint {
    /// Graph point with `w = v + p + Dz` filled in.
    pub fn new(z: Point, v: Point, p: Point, d: &Cocoercive) -> Result<Self> {
        check_dim(z.len(), &v)?;
        check_dim(z.len(), &p)?;
        let w = &v + &p + d.apply(&z)?;
        Ok(Self { z, v, p, w })
    }

    /// Checks the invariants: `v in A(z)` through the resolvent identity,
    /// `p in N_C(z)` by a sampled certificate, and the decomposition of `w`.
    pub fn validate<R: Rng + ?Sized>(
        &self,
        a: &MaxMonotone,
        d: &Cocoercive,
        c: &ConvexSet,
        rng: &mut R,
        tol: f64,
    ) -> Result<GraphPointCheck> {
        let n = self.z.len();
        for x in [&self.v, &self.p, &self.w] {
            check_dim(n, x)?;
        }
        let jz = a.resolvent(1.0, &(&self.z + &self.v))?;
        let resolvent_residual = (jz - &self.z).norm();
        let normal_certified = c.certify_normal(&self.z, &self.p, rng, 1000, tol)?;
        let decomposition_residual = (&self.w - (&self.v + &self.p + d.apply(&self.z)?)).norm();
        let scale = 1.0 + self.z.norm() + self.v.norm() + self.p.norm();
        let valid = normal_certified
            && resolvent_residual <= tol * scale
            && decomposition_residual <= tol * scale;
        Ok(GraphPointCheck { resolvent_residual, normal_certified, decomposition_residual, valid })
    }
}
