//! Single-valued cocoercive operators: the forward map `D` and the penalty `B`.

use super::sets::ConvexSet;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, is_symmetric, kernel_basis, max_sym_eigenvalue, min_sym_eigenvalue, Matrix, Point};
use crate::tolerances::Tolerances;

/// Common interface of single-valued forward operators.
pub trait ForwardOperator {
    fn dim(&self) -> usize;

    /// Evaluates the operator; the input dimension is not re-checked.
    fn apply_unchecked(&self, x: &Point) -> Point;

    fn apply(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x)?;
        Ok(self.apply_unchecked(x))
    }

    /// Cocoercivity modulus claimed by the descriptor.
    fn modulus(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub enum CocoerciveKind {
    Zero,
    /// Gradient of `x -> 0.5 x^T Q x + c^T x`.
    GradientQuadratic { q: Matrix, c: Point },
}

/// The `eta`-cocoercive operator `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocoercive {
    kind: CocoerciveKind,
    modulus: f64,
    dim: usize,
}

fn validate_modulus(modulus: f64) -> Result<()> {
    if !(modulus > 0.0 && modulus.is_finite()) {
        return Err(Error::InvalidDescriptor(format!("cocoercivity modulus must be > 0, got {modulus}")));
    }
    Ok(())
}

fn validate_psd(m: &Matrix, what: &str) -> Result<f64> {
    let tol = Tolerances::DEFAULT.psd;
    if !is_symmetric(m, tol) {
        return Err(Error::InvalidDescriptor(format!("{what} must be symmetric")));
    }
    if min_sym_eigenvalue(m) < -tol {
        return Err(Error::InvalidDescriptor(format!("{what} must be positive semidefinite")));
    }
    Ok(max_sym_eigenvalue(m))
}

impl Cocoercive {
    pub fn zero(dim: usize, modulus: f64) -> Result<Self> {
        validate_modulus(modulus)?;
        Ok(Self { kind: CocoerciveKind::Zero, modulus, dim })
    }

    /// The modulus may not exceed `1 / lambda_max(Q)`.
    pub fn gradient_quadratic(q: Matrix, c: Point, modulus: f64) -> Result<Self> {
        validate_modulus(modulus)?;
        let lmax = validate_psd(&q, "Q")?;
        check_dim(q.nrows(), &c)?;
        if lmax > 0.0 && modulus > (1.0 / lmax) * (1.0 + 1e-12) {
            return Err(Error::InvalidDescriptor(format!(
                "modulus {modulus} exceeds 1/lambda_max(Q) = {}",
                1.0 / lmax
            )));
        }
        let dim = q.nrows();
        Ok(Self { kind: CocoerciveKind::GradientQuadratic { q, c }, modulus, dim })
    }

    pub fn kind(&self) -> &CocoerciveKind {
        &self.kind
    }
}

impl ForwardOperator for Cocoercive {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            CocoerciveKind::Zero => Point::zeros(self.dim),
            CocoerciveKind::GradientQuadratic { q, c } => q * x + c,
        }
    }

    fn modulus(&self) -> f64 {
        self.modulus
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyKind {
    /// `x - P_C x`, the gradient of `0.5 d(x, C)^2`.
    DistSqGradient(ConvexSet),
    /// `x -> M x` with `M` symmetric positive semidefinite; vanishes on `ker M`.
    LinearPsd(Matrix),
}

/// The `mu`-cocoercive penalty operator `B` with `zer B = C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    kind: PenaltyKind,
    mu: f64,
    zero_set: ConvexSet,
}

impl Penalty {
    /// `mu <= 1`, since identity minus a projection is firmly nonexpansive.
    pub fn dist_sq_gradient(set: ConvexSet, mu: f64) -> Result<Self> {
        validate_modulus(mu)?;
        if mu > 1.0 {
            return Err(Error::InvalidDescriptor(format!("dist_sq_gradient is 1-cocoercive; mu = {mu} > 1")));
        }
        Ok(Self { zero_set: set.clone(), kind: PenaltyKind::DistSqGradient(set), mu })
    }

    /// The zero set is `ker M`, stored as an affine subspace through the origin.
    pub fn linear_psd(m: Matrix, mu: f64) -> Result<Self> {
        validate_modulus(mu)?;
        let lmax = validate_psd(&m, "penalty matrix")?;
        if lmax > 0.0 && mu > (1.0 / lmax) * (1.0 + 1e-12) {
            return Err(Error::InvalidDescriptor(format!("mu {mu} exceeds 1/lambda_max(M) = {}", 1.0 / lmax)));
        }
        let dim = m.nrows();
        let kernel = kernel_basis(&m, 1e-12);
        let zero_set = ConvexSet::affine(Point::zeros(dim), kernel)?;
        Ok(Self { kind: PenaltyKind::LinearPsd(m), mu, zero_set })
    }

    pub fn kind(&self) -> &PenaltyKind {
        &self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `C = zer B`.
    pub fn zero_set(&self) -> &ConvexSet {
        &self.zero_set
    }
}

impl ForwardOperator for Penalty {
    fn dim(&self) -> usize {
        self.zero_set.dim()
    }

    fn apply_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            PenaltyKind::DistSqGradient(set) => x - set.project_unchecked(x),
            PenaltyKind::LinearPsd(m) => m * x,
        }
    }

    fn modulus(&self) -> f64 {
        self.mu
    }
}

/// Upper bound on `sup_{u in C} phi_B(u, p/beta) - sigma_C(p/beta)` for the
/// distance-squared penalty, obtained from `phi_B <= Psi + Psi*` with
/// `Psi* = 0.5 ||.||^2 + sigma_C`: the bound is `0.5 ||p||^2 / beta^2`.
///
/// `p` must lie in the range of `N_C`. For the supported set kinds (polyhedral
/// or compact) that range is exactly the domain of `sigma_C`.
pub fn fitzpatrick_gap_bound(b: &Penalty, p: &Point, beta: f64) -> Result<f64> {
    let PenaltyKind::DistSqGradient(set) = b.kind() else {
        return Err(Error::Unsupported(
            "Fitzpatrick gap bound is only available for the dist_sq_gradient penalty".into(),
        ));
    };
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    check_dim(set.dim(), p)?;
    if !set.support(p)?.is_finite() {
        return Err(Error::PremiseViolated("p is not in the range of the normal cone of C".into()));
    }
    Ok(0.5 * p.norm_squared() / (beta * beta))
}

/// Outcome of a sampled cocoercivity test.
#[derive(Debug, Clone, PartialEq)]
pub struct CocoerciveReport {
    pub trials: usize,
    /// Smallest `<x - y, Mx - My> - modulus ||Mx - My||^2` observed.
    pub worst_margin: f64,
    pub worst_pair: Option<(Point, Point)>,
    pub passed: bool,
}

/// Evaluates `<x - y, Mx - My> >= modulus ||Mx - My||^2` on sampled pairs.
pub fn check_cocoercive<F>(op: &dyn ForwardOperator, modulus: f64, mut sampler: F, trials: usize) -> CocoerciveReport
where
    F: FnMut() -> (Point, Point),
{
    let tol = Tolerances::DEFAULT.cocoercive_margin;
    let mut worst_margin = f64::INFINITY;
    let mut worst_pair = None;
    for _ in 0..trials.max(1) {
        let (x, y) = sampler();
        let dm = op.apply_unchecked(&x) - op.apply_unchecked(&y);
        let margin = (&x - &y).dot(&dm) - modulus * dm.norm_squared();
        if margin < worst_margin {
            worst_margin = margin;
            worst_pair = Some((x, y));
        }
    }
    CocoerciveReport { trials: trials.max(1), worst_margin, worst_pair, passed: worst_margin >= -tol }
}

/// Sampler of independent uniform pairs in `[-scale, scale]^dim`.
pub fn uniform_pairs<R: rand::Rng>(rng: &mut R, dim: usize, scale: f64) -> impl FnMut() -> (Point, Point) + '_ {
    move || {
        let x = Point::from_fn(dim, |_, _| rng.random_range(-scale..scale));
        let y = Point::from_fn(dim, |_, _| rng.random_range(-scale..scale));
        (x, y)
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
    fn dist_sq_gradient_values() {
        let b = Penalty::dist_sq_gradient(unit_box(), 1.0).unwrap();
        assert_eq!(b.apply(&point(&[0.5, 0.0])).unwrap(), point(&[0.0, 0.0]));
        let x = point(&[2.0, 0.0]);
        let expected = &x - unit_box().project(&x).unwrap();
        assert_eq!(b.apply(&x).unwrap(), expected);
        assert_eq!(expected, point(&[1.0, 0.0]));
    }

    #[test]
    fn gradient_quadratic_stationary_point() {
        let d = Cocoercive::gradient_quadratic(Matrix::identity(2, 2) * 2.0, point(&[-2.0, 0.0]), 0.5).unwrap();
        assert_eq!(d.apply(&point(&[1.0, 0.0])).unwrap(), point(&[0.0, 0.0]));
    }

    #[test]
    fn modulus_bounds_are_enforced() {
        assert!(Cocoercive::gradient_quadratic(Matrix::identity(2, 2) * 4.0, point(&[0.0, 0.0]), 0.5).is_err());
        assert!(Penalty::dist_sq_gradient(unit_box(), 1.5).is_err());
        assert!(Cocoercive::zero(2, 0.0).is_err());
        let lp = Penalty::linear_psd(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(lp.zero_set().dim(), 2);
        assert_eq!(lp.apply(&point(&[0.0, 3.0])).unwrap(), point(&[0.0, 0.0]));
    }

    #[test]
    fn cocoercive_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = Cocoercive::zero(2, 3.0).unwrap();
        assert!(check_cocoercive(&zero, 3.0, uniform_pairs(&mut rng, 2, 3.0), 100).passed);

        let sets = [
            unit_box(),
            ConvexSet::ball(point(&[0.5, 0.0]), 1.2).unwrap(),
            ConvexSet::halfspace(point(&[1.0, 1.0]), 0.0).unwrap(),
            ConvexSet::affine(point(&[0.0, 1.0]), vec![point(&[1.0, 2.0])]).unwrap(),
        ];
        for set in sets {
            let b = Penalty::dist_sq_gradient(set, 1.0).unwrap();
            let report = check_cocoercive(&b, 1.0, uniform_pairs(&mut rng, 2, 3.0), 1000);
            assert!(report.passed, "worst margin {}", report.worst_margin);
        }

        // Q = 4I is 1/4-cocoercive; along an eigenvector the margin is 4|d|^2 - 8|d|^2 < 0.
        let q4 = Cocoercive::gradient_quadratic(Matrix::identity(2, 2) * 4.0, point(&[0.0, 0.0]), 0.25).unwrap();
        let mut pair = || (point(&[1.0, 0.0]), point(&[0.0, 0.0]));
        let report = check_cocoercive(&q4, 0.5, &mut pair, 1);
        assert!(!report.passed);
        assert!((report.worst_margin + 4.0).abs() < 1e-15);
        assert!(!check_cocoercive(&q4, 0.5, uniform_pairs(&mut rng, 2, 3.0), 100).passed);
    }

    #[test]
    fn gap_bound_values() {
        let b = Penalty::dist_sq_gradient(unit_box(), 1.0).unwrap();
        assert_eq!(fitzpatrick_gap_bound(&b, &point(&[0.0, 0.0]), 3.0).unwrap(), 0.0);
        assert!((fitzpatrick_gap_bound(&b, &point(&[2.0, 0.0]), 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((fitzpatrick_gap_bound(&b, &point(&[0.6, 0.8]), 10.0).unwrap() - 0.005).abs() < 1e-15);
        let lp = Penalty::linear_psd(Matrix::identity(2, 2), 1.0).unwrap();
        assert!(matches!(fitzpatrick_gap_bound(&lp, &point(&[0.0, 0.0]), 1.0), Err(Error::Unsupported(_))));
        let line = ConvexSet::affine(point(&[0.0, 0.0]), vec![point(&[1.0, 0.0])]).unwrap();
        let bl = Penalty::dist_sq_gradient(line, 1.0).unwrap();
        assert!(fitzpatrick_gap_bound(&bl, &point(&[1.0, 0.0]), 1.0).is_err());
    }

    /// Independent check of the bound: maximize `<y, u> - Psi(y)` over a grid
    /// to get `Psi*(u)` and subtract `sigma_C(u)`.
    #[test]
    fn gap_bound_matches_conjugate_grid_search() {
        let set = unit_box();
        let b = Penalty::dist_sq_gradient(set.clone(), 1.0).unwrap();
        for (p, beta) in [(point(&[2.0, 0.0]), 2.0), (point(&[1.0, 0.0]), 10.0)] {
            let u = &p / beta;
            let mut best = f64::NEG_INFINITY;
            let steps = 1200;
            for i in 0..=steps {
                for j in 0..=20 {
                    let y = point(&[-3.0 + 6.0 * i as f64 / steps as f64, -1.0 + 2.0 * j as f64 / 20.0]);
                    let psi = 0.5 * set.distance(&y).unwrap().powi(2);
                    best = best.max(y.dot(&u) - psi);
                }
            }
            let gap = best - set.support(&u).unwrap();
            let bound = fitzpatrick_gap_bound(&b, &p, beta).unwrap();
            assert!((gap - bound).abs() < 1e-5, "grid {gap} vs bound {bound}");
        }
    }
}
