//! Closed convex sets: projection, support function, normal cones.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, check_finite, max_orthonormality_drift, orthonormalize, Point};
use crate::tolerances::Tolerances;

/// The concrete shape of a [`ConvexSet`].
#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{x : lo <= x <= hi}` componentwise.
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
    /// `anchor + span(basis)` with an orthonormal basis. An empty basis is the
    /// single point `anchor`; a full basis is the whole space.
    Affine { anchor: Point, basis: Vec<Point> },
    /// `{x : <normal, x> <= offset}`.
    Halfspace { normal: Point, offset: f64 },
    Singleton(Point),
}

/// A nonempty closed convex subset of `R^n`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
}

impl ConvexSet {
    pub fn boxed(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.len(), &hi)?;
        check_finite(&lo, "box lower bound")?;
        check_finite(&hi, "box upper bound")?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidDescriptor("box requires lo <= hi componentwise".into()));
        }
        let dim = lo.len();
        Ok(Self { kind: SetKind::Box { lo, hi }, dim })
    }

    /// A zero radius degenerates to the singleton `{center}`.
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        check_finite(&center, "ball center")?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDescriptor(format!("ball radius must be >= 0, got {radius}")));
        }
        if radius == 0.0 {
            return Ok(Self::singleton(center));
        }
        let dim = center.len();
        Ok(Self { kind: SetKind::Ball { center, radius }, dim })
    }

    /// Directions are re-orthonormalized when their Gram matrix drifts from
    /// the identity by more than the configured tolerance.
    pub fn affine(anchor: Point, directions: Vec<Point>) -> Result<Self> {
        check_finite(&anchor, "affine anchor")?;
        let dim = anchor.len();
        for d in &directions {
            check_dim(dim, d)?;
            check_finite(d, "affine direction")?;
        }
        if directions.len() > dim {
            return Err(Error::InvalidDescriptor("more directions than the ambient dimension".into()));
        }
        let basis = if max_orthonormality_drift(&directions) > Tolerances::DEFAULT.orthonormal {
            orthonormalize(&directions)?
        } else {
            directions
        };
        Ok(Self { kind: SetKind::Affine { anchor, basis }, dim })
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        check_finite(&normal, "halfspace normal")?;
        if normal.norm() == 0.0 {
            return Err(Error::InvalidDescriptor("halfspace normal must be nonzero".into()));
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite("halfspace offset"));
        }
        let dim = normal.len();
        Ok(Self { kind: SetKind::Halfspace { normal, offset }, dim })
    }

    pub fn singleton(point: Point) -> Self {
        let dim = point.len();
        Self { kind: SetKind::Singleton(point), dim }
    }

    /// `R^n`, as an affine subspace spanned by the canonical basis.
    pub fn whole_space(dim: usize) -> Self {
        let basis = (0..dim).map(|i| Point::from_fn(dim, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
        Self { kind: SetKind::Affine { anchor: Point::zeros(dim), basis }, dim }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(&self.kind, SetKind::Affine { basis, .. } if basis.len() == self.dim)
    }

    /// Nearest point of the set.
    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            SetKind::Box { lo, hi } => x.zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h)),
            SetKind::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (*radius / n)
                }
            }
            SetKind::Affine { anchor, basis } => {
                let d = x - anchor;
                let mut y = anchor.clone();
                for b in basis {
                    y.axpy(d.dot(b), b, 1.0);
                }
                y
            }
            SetKind::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - normal * (excess / normal.norm_squared())
                }
            }
            SetKind::Singleton(p) => p.clone(),
        }
    }

    pub fn distance(&self, x: &Point) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol * (1.0 + x.norm()))
    }

    /// `sup_{y in C} <y, u>`; `+inf` is a legitimate value.
    pub fn support(&self, u: &Point) -> Result<f64> {
        check_dim(self.dim, u)?;
        let un = u.norm();
        if un == 0.0 {
            return Ok(0.0);
        }
        let orth_tol = Tolerances::DEFAULT.graph * (1.0 + un);
        Ok(match &self.kind {
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi.iter())
                .zip(u.iter())
                .map(|((l, h), ui)| (l * ui).max(h * ui))
                .sum(),
            SetKind::Ball { center, radius } => center.dot(u) + radius * un,
            SetKind::Affine { anchor, basis } => {
                if basis.iter().all(|b| b.dot(u).abs() <= orth_tol) {
                    anchor.dot(u)
                } else {
                    f64::INFINITY
                }
            }
            SetKind::Halfspace { normal, offset } => {
                let t = normal.dot(u) / normal.norm_squared();
                let residual = (u - normal * t).norm();
                if t >= 0.0 && residual <= orth_tol {
                    t * offset
                } else {
                    f64::INFINITY
                }
            }
            SetKind::Singleton(p) => p.dot(u),
        })
    }

    /// Exact test of `p in N_C(z)` via `z in C` and `sigma_C(p) = <z, p>`.
    pub fn normal_cone_contains(&self, z: &Point, p: &Point, tol: f64) -> Result<bool> {
        check_dim(self.dim, p)?;
        if !self.contains(z, tol)? {
            return Ok(false);
        }
        let sigma = self.support(p)?;
        Ok(sigma.is_finite() && sigma - z.dot(p) <= tol * (1.0 + p.norm() * (1.0 + z.norm())))
    }

    /// Certificate check that `p in N_C(witness)`: the witness lies in the set
    /// and `<y - witness, p> <= tol` on `samples` points `y` drawn from the set.
    pub fn certify_normal<R: Rng + ?Sized>(
        &self,
        witness: &Point,
        p: &Point,
        rng: &mut R,
        samples: usize,
        tol: f64,
    ) -> Result<bool> {
        check_dim(self.dim, witness)?;
        check_dim(self.dim, p)?;
        if !self.contains(witness, tol)? {
            return Ok(false);
        }
        let spread = 1.0 + witness.norm();
        for _ in 0..samples {
            let y = self.sample(rng, witness, spread);
            if (y - witness).dot(p) > tol * (1.0 + p.norm() * spread) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// A point of the set, drawn near `around` for unbounded kinds.
    /// Boundary points are drawn with positive probability for bounded kinds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, around: &Point, spread: f64) -> Point {
        match &self.kind {
            SetKind::Box { lo, hi } => lo.zip_map(hi, |l, h| match rng.random_range(0..8) {
                0 => l,
                1 => h,
                _ => l + (h - l) * rng.random::<f64>(),
            }),
            SetKind::Ball { center, radius } => {
                let dir = Point::from_fn(self.dim, |_, _| rng.random_range(-1.0..1.0));
                let n = dir.norm().max(1e-300);
                let scale = if rng.random_bool(0.25) { 1.0 } else { rng.random::<f64>() };
                center + dir * (radius * scale / n)
            }
            SetKind::Affine { basis, .. } => {
                let mut y = self.project_unchecked(around);
                for b in basis {
                    y.axpy(rng.random_range(-spread..spread), b, 1.0);
                }
                y
            }
            SetKind::Halfspace { .. } => {
                let y = around + Point::from_fn(self.dim, |_, _| rng.random_range(-spread..spread));
                self.project_unchecked(&y)
            }
            SetKind::Singleton(p) => p.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> ConvexSet {
        ConvexSet::boxed(point(&[-1.0, -1.0]), point(&[1.0, 1.0])).unwrap()
    }

    #[test]
    fn box_projection_clamps() {
        let y = unit_box().project(&point(&[2.0, 0.5])).unwrap();
        assert_eq!(y, point(&[1.0, 0.5]));
    }

    #[test]
    fn ball_projection_matches_boundary_grid_search() {
        let ball = ConvexSet::ball(point(&[0.0, 0.0]), 1.0).unwrap();
        let x = point(&[3.0, 4.0]);
        let y = ball.project(&x).unwrap();
        // Oracle: brute-force nearest point over a fine parametrization of the circle.
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let n = 200_000;
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (c, s) = (th.cos(), th.sin());
            let d = (x[0] - c).hypot(x[1] - s);
            if d < best.0 {
                best = (d, c, s);
            }
        }
        assert!((best.1 - 0.6).abs() < 1e-4 && (best.2 - 0.8).abs() < 1e-4);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projection_is_identity_on_the_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = vec![
            unit_box(),
            ConvexSet::ball(point(&[1.0, -2.0]), 0.7).unwrap(),
            ConvexSet::affine(point(&[0.0, 1.0]), vec![point(&[1.0, 1.0])]).unwrap(),
            ConvexSet::halfspace(point(&[1.0, 2.0]), 0.5).unwrap(),
            ConvexSet::singleton(point(&[4.0, 4.0])),
        ];
        for set in &sets {
            for _ in 0..50 {
                let y = set.sample(&mut rng, &point(&[0.3, -0.2]), 3.0);
                let py = set.project(&y).unwrap();
                assert!((py - &y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn zero_radius_ball_is_a_singleton() {
        let s = ConvexSet::ball(point(&[1.0, 2.0]), 0.0).unwrap();
        assert!(matches!(s.kind(), SetKind::Singleton(_)));
    }

    #[test]
    fn invalid_descriptors_are_rejected() {
        assert!(ConvexSet::boxed(point(&[1.0]), point(&[0.0])).is_err());
        assert!(ConvexSet::ball(point(&[0.0]), -1.0).is_err());
        assert!(ConvexSet::halfspace(point(&[0.0, 0.0]), 1.0).is_err());
        assert!(ConvexSet::affine(point(&[0.0, 0.0]), vec![point(&[1.0, 0.0]), point(&[2.0, 0.0])]).is_err());
    }

    #[test]
    fn affine_basis_is_reorthonormalized() {
        let s = ConvexSet::affine(point(&[0.0, 0.0, 0.0]), vec![point(&[2.0, 0.0, 0.0]), point(&[1.0, 1.0, 0.0])])
            .unwrap();
        let SetKind::Affine { basis, .. } = s.kind() else { unreachable!() };
        assert!(max_orthonormality_drift(basis) < 1e-12);
        let y = s.project(&point(&[3.0, -2.0, 5.0])).unwrap();
        assert!((y - point(&[3.0, -2.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            unit_box().project(&point(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn support_function_closed_forms() {
        assert_eq!(unit_box().support(&point(&[1.0, 1.0])).unwrap(), 2.0);
        assert_eq!(unit_box().support(&point(&[0.0, 0.0])).unwrap(), 0.0);
        let ball = ConvexSet::ball(point(&[0.0, 0.0]), 2.0).unwrap();
        let s = ball.support(&point(&[0.0, 3.0])).unwrap();
        // Oracle: sample the circle of radius 2.
        let sampled = (0..10_000)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
                3.0 * 2.0 * th.sin()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((s - 6.0).abs() < 1e-14);
        assert!((sampled - 6.0).abs() < 1e-6);

        let line = ConvexSet::affine(point(&[0.0, 1.0]), vec![point(&[1.0, 0.0])]).unwrap();
        assert_eq!(line.support(&point(&[0.0, 2.0])).unwrap(), 2.0);
        assert_eq!(line.support(&point(&[1.0, 2.0])).unwrap(), f64::INFINITY);

        let half = ConvexSet::halfspace(point(&[0.0, 2.0]), 4.0).unwrap();
        assert_eq!(half.support(&point(&[0.0, 1.0])).unwrap(), 2.0);
        assert_eq!(half.support(&point(&[0.0, -1.0])).unwrap(), f64::INFINITY);
        assert_eq!(half.support(&point(&[1.0, 1.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn normal_cone_membership() {
        let b = unit_box();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let corner = point(&[1.0, 1.0]);
        assert!(b.normal_cone_contains(&corner, &point(&[2.0, 0.5]), 1e-10).unwrap());
        assert!(!b.normal_cone_contains(&corner, &point(&[-1.0, 0.5]), 1e-10).unwrap());
        assert!(b.certify_normal(&corner, &point(&[2.0, 0.5]), &mut rng, 500, 1e-10).unwrap());
        assert!(!b.certify_normal(&corner, &point(&[-1.0, 0.5]), &mut rng, 500, 1e-10).unwrap());
        // Interior points only admit the zero normal.
        let inner = point(&[0.2, 0.0]);
        assert!(!b.certify_normal(&inner, &point(&[0.1, 0.0]), &mut rng, 500, 1e-10).unwrap());
    }
}
