//! Maximally monotone operators with computable resolvents.

use nalgebra::DMatrix;

use super::sets::{ConvexSet, SetKind};
use crate::error::{Error, Result};
use crate::linalg::{
    check_dim, check_finite, is_symmetric, min_sym_eigenvalue, spectral_norm, symmetric_part, Matrix, Point,
};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneKind {
    Zero,
    /// `x -> M x` with `M + M^T` positive semidefinite.
    Linear(Matrix),
    /// `x -> M x + q`.
    Affine { m: Matrix, q: Point },
    NormalCone(ConvexSet),
    /// `weight * d||.||_1`.
    SubdifferentialL1 { weight: f64 },
    /// `M + N_C`.
    LinearPlusNormalCone { m: Matrix, set: ConvexSet },
}

/// A maximally monotone operator `A`, optionally `gamma`-strongly monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMonotone {
    kind: MonotoneKind,
    gamma: f64,
    dim: usize,
    /// Spectral norm of the linear part, cached for step-size selection.
    linear_norm: f64,
}

fn validate_linear(m: &Matrix, gamma: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidDescriptor("monotone matrix must be square".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("monotone matrix"));
    }
    let lmin = min_sym_eigenvalue(&symmetric_part(m));
    let tol = Tolerances::DEFAULT.psd;
    if lmin < -tol {
        return Err(Error::InvalidDescriptor(format!(
            "symmetric part is not positive semidefinite (smallest eigenvalue {lmin:e})"
        )));
    }
    if gamma > lmin + tol {
        return Err(Error::InvalidDescriptor(format!(
            "strong monotonicity modulus {gamma} exceeds smallest eigenvalue {lmin} of the symmetric part"
        )));
    }
    Ok(spectral_norm(m))
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidDescriptor(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

impl MaxMonotone {
    pub fn zero(dim: usize) -> Self {
        Self { kind: MonotoneKind::Zero, gamma: 0.0, dim, linear_norm: 0.0 }
    }

    pub fn linear(m: Matrix, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        let linear_norm = validate_linear(&m, gamma)?;
        let dim = m.nrows();
        Ok(Self { kind: MonotoneKind::Linear(m), gamma, dim, linear_norm })
    }

    pub fn affine(m: Matrix, q: Point, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        let linear_norm = validate_linear(&m, gamma)?;
        check_dim(m.nrows(), &q)?;
        check_finite(&q, "affine offset")?;
        let dim = m.nrows();
        Ok(Self { kind: MonotoneKind::Affine { m, q }, gamma, dim, linear_norm })
    }

    pub fn normal_cone(set: ConvexSet) -> Self {
        let dim = set.dim();
        Self { kind: MonotoneKind::NormalCone(set), gamma: 0.0, dim, linear_norm: 0.0 }
    }

    pub fn subdifferential_l1(dim: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidDescriptor(format!("l1 weight must be >= 0, got {weight}")));
        }
        Ok(Self { kind: MonotoneKind::SubdifferentialL1 { weight }, gamma: 0.0, dim, linear_norm: 0.0 })
    }

    pub fn linear_plus_normal_cone(m: Matrix, set: ConvexSet, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        let linear_norm = validate_linear(&m, gamma)?;
        if set.dim() != m.nrows() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: set.dim() });
        }
        let dim = m.nrows();
        Ok(Self { kind: MonotoneKind::LinearPlusNormalCone { m, set }, gamma, dim, linear_norm })
    }

    pub fn kind(&self) -> &MonotoneKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Strong monotonicity modulus; 0 for merely monotone operators.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `J_{lambda A} x = (Id + lambda A)^{-1} x`.
    pub fn resolvent(&self, lambda: f64, x: &Point) -> Result<Point> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("resolvent step must be > 0, got {lambda}")));
        }
        check_dim(self.dim, x)?;
        check_finite(x, "resolvent argument")?;
        match &self.kind {
            MonotoneKind::Zero => Ok(x.clone()),
            MonotoneKind::Linear(m) => solve_shifted(m, lambda, x.clone()),
            MonotoneKind::Affine { m, q } => solve_shifted(m, lambda, x - q * lambda),
            MonotoneKind::NormalCone(set) => Ok(set.project_unchecked(x)),
            MonotoneKind::SubdifferentialL1 { weight } => Ok(soft_threshold(x, lambda * weight)),
            MonotoneKind::LinearPlusNormalCone { m, set } => {
                linear_plus_normal_cone_resolvent(m, set, self.linear_norm, lambda, x, &Tolerances::DEFAULT)
            }
        }
    }

    /// `A_alpha x = (x - J_{alpha A} x) / alpha`.
    pub fn yosida(&self, alpha: f64, x: &Point) -> Result<Point> {
        let j = self.resolvent(alpha, x)?;
        Ok((x - j) / alpha)
    }
}

/// Componentwise `sign(x) * max(|x| - t, 0)`.
pub fn soft_threshold(x: &Point, t: f64) -> Point {
    x.map(|v| v.signum() * (v.abs() - t).max(0.0))
}

/// Solves `(I + lambda M) y = rhs`.
fn solve_shifted(m: &Matrix, lambda: f64, rhs: Point) -> Result<Point> {
    let n = m.nrows();
    let mut a = m * lambda;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    // I + lambda M has positive definite symmetric part, hence is invertible.
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidDescriptor("singular system I + lambda M".into()))
}

/// Resolvent of `M + N_C`: finds `y in C` with `x - (I + lambda M) y in N_C(y)`.
///
/// Affine subspaces reduce to a linear solve in the subspace coordinates.
/// Other sets use the projected iteration `y <- P_C(y - tau F(y))` on the
/// strongly monotone map `F(y) = (I + lambda M) y - x`.
fn linear_plus_normal_cone_resolvent(
    m: &Matrix,
    set: &ConvexSet,
    m_norm: f64,
    lambda: f64,
    x: &Point,
    tol: &Tolerances,
) -> Result<Point> {
    let n = m.nrows();
    let mut shifted = m * lambda;
    for i in 0..n {
        shifted[(i, i)] += 1.0;
    }
    if let SetKind::Affine { anchor, basis } = set.kind() {
        if basis.is_empty() {
            return Ok(anchor.clone());
        }
        let u = DMatrix::from_columns(basis);
        let reduced = u.transpose() * &shifted * &u;
        let rhs = u.transpose() * (x - &shifted * anchor);
        let coeff = reduced
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidDescriptor("singular reduced system".into()))?;
        return Ok(anchor + u * coeff);
    }
    if let SetKind::Singleton(p) = set.kind() {
        return Ok(p.clone());
    }

    let strong = 1.0 + lambda * min_sym_eigenvalue(&symmetric_part(m)).max(0.0);
    let lip = 1.0 + lambda * m_norm;
    let (step, contraction) = if is_symmetric(m, 1e-14) {
        (2.0 / (strong + lip), (lip - strong) / (lip + strong))
    } else {
        (strong / (lip * lip), (1.0 - (strong * strong) / (lip * lip)).max(0.0).sqrt())
    };
    let scale = 1.0 + x.norm();
    let mut y = set.project_unchecked(x);
    let mut last_step = f64::INFINITY;
    for _ in 0..tol.inner_max_iter {
        let grad = &shifted * &y - x;
        let next = set.project_unchecked(&(&y - grad * step));
        last_step = (&next - &y).norm();
        y = next;
        let err_bound = if contraction < 1.0 {
            last_step * contraction / (1.0 - contraction)
        } else {
            last_step
        };
        if err_bound <= tol.inner_residual * scale || last_step <= 4.0 * f64::EPSILON * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence { iterations: tol.inner_max_iter, residual: last_step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resolvent_of_zero_is_identity() {
        let a = MaxMonotone::zero(2);
        assert_eq!(a.resolvent(7.3, &point(&[1.0, 2.0])).unwrap(), point(&[1.0, 2.0]));
        assert_eq!(a.yosida(0.4, &point(&[1.0, 2.0])).unwrap(), point(&[0.0, 0.0]));
    }

    #[test]
    fn resolvent_of_identity_halves() {
        let a = MaxMonotone::linear(Matrix::identity(2, 2), 1.0).unwrap();
        let y = a.resolvent(1.0, &point(&[2.0, 4.0])).unwrap();
        assert!((y - point(&[1.0, 2.0])).norm() < 1e-15);
        let ya = a.yosida(1.0, &point(&[2.0, 0.0])).unwrap();
        assert!((ya - point(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn l1_resolvent_is_soft_threshold() {
        let a = MaxMonotone::subdifferential_l1(2, 1.0).unwrap();
        let x = point(&[1.2, -0.3]);
        let y = a.resolvent(0.5, &x).unwrap();
        // Oracle: 1-D grid minimization of 0.5 (y - x)^2 + 0.5 |y| per coordinate.
        for i in 0..2 {
            let best = (-200_000..=200_000)
                .map(|k| k as f64 * 1e-5)
                .min_by(|a, b| {
                    let fa = 0.5 * (a - x[i]).powi(2) + 0.5 * a.abs();
                    let fb = 0.5 * (b - x[i]).powi(2) + 0.5 * b.abs();
                    fa.total_cmp(&fb)
                })
                .unwrap();
            assert!((best - y[i]).abs() < 2e-5);
        }
        assert!((y[0] - 0.7).abs() < 1e-15);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn normal_cone_yosida_against_projection() {
        let set = ConvexSet::boxed(point(&[-1.0, -1.0]), point(&[1.0, 1.0])).unwrap();
        let a = MaxMonotone::normal_cone(set.clone());
        let x = point(&[3.0, 0.0]);
        let expected = (&x - set.project(&x).unwrap()) / 2.0;
        let got = a.yosida(2.0, &x).unwrap();
        assert_eq!(got, expected);
        assert_eq!(got, point(&[1.0, 0.0]));
    }

    #[test]
    fn rejects_bad_descriptors() {
        let not_monotone = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(MaxMonotone::linear(not_monotone, 0.0).is_err());
        assert!(MaxMonotone::linear(Matrix::identity(2, 2), 2.0).is_err());
        assert!(MaxMonotone::subdifferential_l1(2, -1.0).is_err());
        let a = MaxMonotone::zero(2);
        assert!(a.resolvent(0.0, &point(&[1.0, 1.0])).is_err());
        assert!(a.resolvent(1.0, &point(&[f64::NAN, 1.0])).is_err());
        assert!(a.resolvent(1.0, &point(&[1.0])).is_err());
    }

    fn skew_plus(gamma: f64) -> Matrix {
        Matrix::from_row_slice(3, 3, &[gamma, 2.0, -1.0, -2.0, gamma, 0.5, 1.0, -0.5, gamma])
    }

    #[test]
    fn linear_plus_box_satisfies_inclusion() {
        let set = ConvexSet::boxed(point(&[-0.5, -0.5, -0.5]), point(&[0.5, 0.5, 0.5])).unwrap();
        let a = MaxMonotone::linear_plus_normal_cone(skew_plus(0.3), set.clone(), 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = Point::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let lambda = rng.random_range(0.05..4.0);
            let y = a.resolvent(lambda, &x).unwrap();
            // x - y - lambda M y must lie in N_C(y).
            let p = &x - &y - skew_plus(0.3) * &y * lambda;
            assert!(set.normal_cone_contains(&y, &(p / lambda), 1e-9).unwrap());
        }
    }

    #[test]
    fn linear_plus_affine_matches_reduced_solution() {
        let set = ConvexSet::affine(point(&[0.0, 0.0, 1.0]), vec![point(&[1.0, 0.0, 0.0])]).unwrap();
        let m = skew_plus(1.0);
        let a = MaxMonotone::linear_plus_normal_cone(m.clone(), set, 1.0).unwrap();
        let x = point(&[2.0, -1.0, 0.5]);
        let y = a.resolvent(0.5, &x).unwrap();
        // y = (s, 0, 1); first component of (x - y - 0.5 M y) vanishes:
        // 2 - s - 0.5 (s + 0 - 1) = 0  =>  s = 5/3.
        assert!((y - point(&[5.0 / 3.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn firm_nonexpansiveness_on_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let boxset = ConvexSet::boxed(point(&[-1.0, 0.0, -2.0]), point(&[1.0, 0.5, 2.0])).unwrap();
        let ops = vec![
            MaxMonotone::zero(3),
            MaxMonotone::linear(skew_plus(0.0), 0.0).unwrap(),
            MaxMonotone::affine(skew_plus(1.0), point(&[1.0, -1.0, 0.0]), 1.0).unwrap(),
            MaxMonotone::normal_cone(boxset.clone()),
            MaxMonotone::subdifferential_l1(3, 0.7).unwrap(),
            MaxMonotone::linear_plus_normal_cone(skew_plus(0.5), boxset, 0.5).unwrap(),
        ];
        for a in &ops {
            for _ in 0..200 {
                let x = Point::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
                let y = Point::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
                let lambda = rng.random_range(0.01..5.0);
                let jx = a.resolvent(lambda, &x).unwrap();
                let jy = a.resolvent(lambda, &y).unwrap();
                let d = &jx - &jy;
                assert!(d.norm_squared() <= (&x - &y).dot(&d) + 1e-10, "{:?}", a.kind());
            }
        }
    }
}
