//! Builtin test instances with independently computed solutions, and seeded
//! random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::ProblemInstance;
use crate::error::{Error, Result};
use crate::linalg::{max_sym_eigenvalue, min_sym_eigenvalue, point, Matrix, Point};
use crate::operators::{
    soft_threshold, Cocoercive, CocoerciveKind, ConvexSet, ForwardOperator, GraphPoint, GraphPointCheck, MaxMonotone,
    MonotoneKind, Penalty, SetKind,
};
use crate::tolerances::Tolerances;

pub const BUILTIN_IDS: [&str; 4] = ["P0_zero", "P1_strongly_monotone", "P2_monotone_line", "P3_l1_box"];

/// Seed of the sampled normal-cone certificates used by validation.
const CERTIFICATE_SEED: u64 = 0x5eed;

/// Solution set of an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionSet {
    /// The unique solution.
    Point(Point),
    /// A closed convex solution set known in closed form.
    Set(ConvexSet),
    /// One solution of an instance whose solution set is not known to be a singleton.
    Representative(Point),
}

impl SolutionSet {
    pub fn distance(&self, x: &Point) -> Result<f64> {
        match self {
            SolutionSet::Point(z) | SolutionSet::Representative(z) => {
                crate::linalg::check_dim(z.len(), x)?;
                Ok((x - z).norm())
            }
            SolutionSet::Set(c) => c.distance(x),
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, SolutionSet::Point(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedInstance {
    pub id: String,
    pub instance: ProblemInstance,
    pub solution: SolutionSet,
    /// `(z, w)` in the graph of `A + D + N_C` with `w = v + p + Dz` and `w ~ 0`.
    pub certificate: GraphPoint,
}

impl NamedInstance {
    /// Validates the certificate at tolerance 1e-10.
    pub fn validate(&self) -> Result<GraphPointCheck> {
        validate_certificate(&self.instance, &self.certificate)
    }
}

fn validate_certificate(pr: &ProblemInstance, gp: &GraphPoint) -> Result<GraphPointCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(CERTIFICATE_SEED);
    gp.validate(pr.a(), pr.d(), pr.constraint_set(), &mut rng, Tolerances::DEFAULT.graph)
}

/// Looks up a builtin instance; the short forms `P0`..`P3` are accepted.
pub fn builtin(id: &str) -> Result<NamedInstance> {
    let canonical = BUILTIN_IDS
        .iter()
        .find(|full| **full == id || full.split('_').next() == Some(id))
        .ok_or_else(|| Error::UnknownInstance(id.to_string()))?;
    match *canonical {
        "P0_zero" => p0(),
        "P1_strongly_monotone" => p1(),
        "P2_monotone_line" => p2(),
        _ => p3(),
    }
}

fn p0() -> Result<NamedInstance> {
    let n = 2;
    let b = Penalty::dist_sq_gradient(ConvexSet::whole_space(n), 1.0)?;
    let d = Cocoercive::zero(n, 1.0)?;
    let pr = ProblemInstance::new(MaxMonotone::zero(n), d.clone(), b)?;
    let certificate = GraphPoint::new(Point::zeros(n), Point::zeros(n), Point::zeros(n), &d)?;
    Ok(NamedInstance {
        id: "P0_zero".into(),
        instance: pr,
        solution: SolutionSet::Set(ConvexSet::whole_space(n)),
        certificate,
    })
}

fn p1() -> Result<NamedInstance> {
    let skew = Matrix::from_row_slice(
        4,
        4,
        &[0.0, 1.0, 0.5, 0.0, -1.0, 0.0, 0.0, 0.5, -0.5, 0.0, 0.0, 1.0, 0.0, -0.5, -1.0, 0.0],
    );
    let m = Matrix::identity(4, 4) * 2.0 + skew;
    let a = MaxMonotone::linear(m, 2.0)?;
    let d = Cocoercive::gradient_quadratic(Matrix::identity(4, 4), point(&[-1.0, 0.0, 0.0, 0.0]), 1.0)?;
    let c = ConvexSet::affine(Point::zeros(4), vec![point(&[1.0, 0.0, 0.0, 0.0]), point(&[0.0, 1.0, 0.0, 0.0])])?;
    let pr = ProblemInstance::new(a, d, Penalty::dist_sq_gradient(c, 1.0)?)?;
    let sol = oracle_solve(&pr, 1e-13)?;
    Ok(NamedInstance {
        id: "P1_strongly_monotone".into(),
        instance: pr,
        solution: SolutionSet::Point(sol.z),
        certificate: sol.certificate,
    })
}

fn p2() -> Result<NamedInstance> {
    let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let a = MaxMonotone::linear(m, 0.0)?;
    let d = Cocoercive::zero(2, 1.0)?;
    let line = ConvexSet::affine(Point::zeros(2), vec![point(&[1.0, 0.0])])?;
    let pr = ProblemInstance::new(a, d.clone(), Penalty::dist_sq_gradient(line.clone(), 1.0)?)?;
    // At (s, 0): Az = (0, -s) is absorbed by N_C = span(e_2).
    let certificate = GraphPoint::new(point(&[1.0, 0.0]), point(&[0.0, -1.0]), point(&[0.0, 1.0]), &d)?;
    Ok(NamedInstance { id: "P2_monotone_line".into(), instance: pr, solution: SolutionSet::Set(line), certificate })
}

fn p3() -> Result<NamedInstance> {
    let q = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let eta = 1.0 / max_sym_eigenvalue(&q);
    let d = Cocoercive::gradient_quadratic(q, point(&[-4.0, 0.2, 2.5]), eta)?;
    let a = MaxMonotone::subdifferential_l1(3, 1.0)?;
    let c = ConvexSet::boxed(point(&[-1.0; 3]), point(&[1.0; 3]))?;
    let pr = ProblemInstance::new(a, d, Penalty::dist_sq_gradient(c, 1.0)?)?;
    let sol = oracle_solve(&pr, 1e-13)?;
    Ok(NamedInstance {
        id: "P3_l1_box".into(),
        instance: pr,
        solution: SolutionSet::Point(sol.z),
        certificate: sol.certificate,
    })
}

/// Wraps a user-supplied instance, solving it with the oracle. The solution
/// is reported as unique when `A` or `D` is strongly monotone.
pub fn named_from_instance(id: &str, pr: ProblemInstance) -> Result<NamedInstance> {
    let sol = oracle_solve(&pr, 1e-12)?;
    let strongly_monotone_d = match pr.d().kind() {
        CocoerciveKind::GradientQuadratic { q, .. } => min_sym_eigenvalue(q) > Tolerances::DEFAULT.psd,
        CocoerciveKind::Zero => false,
    };
    let solution = if pr.a().gamma() > 0.0 || strongly_monotone_d {
        SolutionSet::Point(sol.z)
    } else {
        SolutionSet::Representative(sol.z)
    };
    Ok(NamedInstance { id: id.to_string(), instance: pr, solution, certificate: sol.certificate })
}

/// Resolvent of `s (A + N_C)`, available in closed form or through the
/// `M + N_C` resolvent for the supported combinations.
enum JointResolvent {
    Plain(MaxMonotone),
    Projection(ConvexSet),
    LinearCone(MaxMonotone, Option<Point>),
    SoftClamp { weight: f64, lo: Point, hi: Point },
}

impl JointResolvent {
    fn new(pr: &ProblemInstance) -> Result<Self> {
        let c = pr.constraint_set();
        let a = pr.a();
        if c.is_whole_space() {
            return Ok(JointResolvent::Plain(a.clone()));
        }
        match a.kind() {
            MonotoneKind::Zero => Ok(JointResolvent::Projection(c.clone())),
            MonotoneKind::Linear(m) => {
                Ok(JointResolvent::LinearCone(MaxMonotone::linear_plus_normal_cone(m.clone(), c.clone(), 0.0)?, None))
            }
            MonotoneKind::Affine { m, q } => Ok(JointResolvent::LinearCone(
                MaxMonotone::linear_plus_normal_cone(m.clone(), c.clone(), 0.0)?,
                Some(q.clone()),
            )),
            MonotoneKind::SubdifferentialL1 { weight } => match c.kind() {
                SetKind::Box { lo, hi } => Ok(JointResolvent::SoftClamp { weight: *weight, lo: lo.clone(), hi: hi.clone() }),
                _ => Err(Error::Unsupported("oracle: l1 term with a non-box constraint set".into())),
            },
            _ => Err(Error::Unsupported("oracle: no joint resolvent for this operator and set".into())),
        }
    }

    fn apply(&self, s: f64, x: &Point) -> Result<Point> {
        match self {
            JointResolvent::Plain(a) => a.resolvent(s, x),
            JointResolvent::Projection(c) => c.project(x),
            JointResolvent::LinearCone(a, None) => a.resolvent(s, x),
            JointResolvent::LinearCone(a, Some(q)) => a.resolvent(s, &(x - q * s)),
            JointResolvent::SoftClamp { weight, lo, hi } => {
                let mut y = soft_threshold(x, s * weight);
                for i in 0..y.len() {
                    y[i] = y[i].clamp(lo[i], hi[i]);
                }
                Ok(y)
            }
        }
    }
}

/// Result of the independent oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub z: Point,
    pub iterations: usize,
    pub certificate: GraphPoint,
    pub check: GraphPointCheck,
    /// Grid-search cross-validation, for dimension at most 2.
    pub grid: Option<GridCheck>,
}

const ORACLE_MAX_ITER: usize = 10_000_000;

/// Solves `0 in Az + Dz + N_C(z)` without the penalty term by the
/// forward-backward iteration `z <- J_{s(A + N_C)}(z - s Dz)`,
/// `s = min(eta, 0.1)/2`, started at a point of `C` and stopped when
/// `||z_{k+1} - z_k|| <= tol * s`.
pub fn oracle_solve(pr: &ProblemInstance, tol: f64) -> Result<OracleSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("oracle tolerance must be > 0, got {tol}")));
    }
    let s = pr.eta().min(0.1) / 2.0;
    let joint = JointResolvent::new(pr)?;
    let mut z = pr.witness().clone();
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < ORACLE_MAX_ITER {
        let dz = pr.d().apply_unchecked(&z);
        let next = joint.apply(s, &(&z - dz * s))?;
        step = (&next - &z).norm();
        z = next;
        iterations += 1;
        if step <= tol * s {
            break;
        }
    }
    if step > tol * s {
        return Err(Error::NoConvergence { iterations, residual: step });
    }
    let certificate = certificate_at(pr, &z)?;
    let check = validate_certificate(pr, &certificate)?;
    let grid = grid_cross_check(pr, &z)?;
    Ok(OracleSolution { z, iterations, certificate, check, grid })
}

/// Splits `-Dz` into `v in Az` and `p in N_C(z)` at a solution `z`.
pub fn certificate_at(pr: &ProblemInstance, z: &Point) -> Result<GraphPoint> {
    let g = -pr.d().apply(z)?;
    let n = z.len();
    let (v, p) = match pr.a().kind() {
        MonotoneKind::Zero => (Point::zeros(n), g),
        MonotoneKind::Linear(m) => {
            let v = m * z;
            let p = &g - &v;
            (v, p)
        }
        MonotoneKind::Affine { m, q } => {
            let v = m * z + q;
            let p = &g - &v;
            (v, p)
        }
        MonotoneKind::SubdifferentialL1 { weight } => {
            let w = *weight;
            let (lo, hi) = match pr.constraint_set().kind() {
                SetKind::Box { lo, hi } => (lo.clone(), hi.clone()),
                _ if pr.constraint_set().is_whole_space() => {
                    (Point::from_element(n, f64::NEG_INFINITY), Point::from_element(n, f64::INFINITY))
                }
                _ => return Err(Error::Unsupported("certificate: l1 term with a non-box constraint set".into())),
            };
            let mut v = Point::zeros(n);
            let mut p = Point::zeros(n);
            for i in 0..n {
                let scale = 1e-12 * (1.0 + z[i].abs());
                let at_bound = (z[i] - lo[i]).abs() <= scale || (hi[i] - z[i]).abs() <= scale;
                if !at_bound {
                    v[i] = g[i];
                } else if z[i] != 0.0 {
                    v[i] = w * z[i].signum();
                    p[i] = g[i] - v[i];
                } else {
                    v[i] = g[i].clamp(-w, w);
                    p[i] = g[i] - v[i];
                }
            }
            (v, p)
        }
        _ => return Err(Error::Unsupported("certificate: operator kind without a closed-form split".into())),
    };
    GraphPoint::new(z.clone(), v, p, pr.d())
}

/// Independent grid search over `C` for instances of dimension at most 2.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCheck {
    pub best: Point,
    pub best_merit: f64,
    pub oracle_merit: f64,
    /// `||best - z_oracle||`; meaningful only when the solution is unique.
    pub distance: f64,
}

/// Merit function vanishing exactly on the solution set (natural residual for
/// single-valued `A`) or minimized on it (potential for the l1 term).
fn merit(pr: &ProblemInstance, x: &Point) -> Option<f64> {
    let c = pr.constraint_set();
    let dx = pr.d().apply_unchecked(x);
    let natural = |ax: Point| (x - c.project_unchecked(&(x - ax - &dx))).norm();
    match pr.a().kind() {
        MonotoneKind::Zero => Some(natural(Point::zeros(x.len()))),
        MonotoneKind::Linear(m) => Some(natural(m * x)),
        MonotoneKind::Affine { m, q } => Some(natural(m * x + q)),
        MonotoneKind::SubdifferentialL1 { weight } => {
            let smooth = match pr.d().kind() {
                CocoerciveKind::Zero => 0.0,
                CocoerciveKind::GradientQuadratic { q, c } => 0.5 * x.dot(&(q * x)) + c.dot(x),
            };
            Some(weight * x.lp_norm(1) + smooth)
        }
        _ => None,
    }
}

const GRID_POINTS: usize = 41;

pub fn grid_cross_check(pr: &ProblemInstance, z: &Point) -> Result<Option<GridCheck>> {
    let n = pr.dim();
    if n > 2 || merit(pr, z).is_none() {
        return Ok(None);
    }
    let c = pr.constraint_set();
    let mut center = pr.witness().clone();
    let mut half = 2.0 * (1.0 + z.norm() + center.norm());
    let mut best = c.project(&center)?;
    let mut best_merit = merit(pr, &best).unwrap_or(f64::INFINITY);
    let offsets: Vec<f64> =
        (0..GRID_POINTS).map(|k| -1.0 + 2.0 * k as f64 / (GRID_POINTS - 1) as f64).collect();
    while half > 1e-6 {
        let mut visit = |g: Point| {
            let y = c.project_unchecked(&g);
            if let Some(m) = merit(pr, &y) {
                if m < best_merit {
                    best_merit = m;
                    best = y;
                }
            }
        };
        if n == 1 {
            for &a in &offsets {
                visit(point(&[center[0] + half * a]));
            }
        } else {
            for &a in &offsets {
                for &b in &offsets {
                    visit(point(&[center[0] + half * a, center[1] + half * b]));
                }
            }
        }
        center = best.clone();
        half /= 10.0;
    }
    let oracle_merit = merit(pr, z).unwrap_or(f64::INFINITY);
    let distance = (&best - z).norm();
    Ok(Some(GridCheck { best, best_merit, oracle_merit, distance }))
}

const RANDOM_RETRIES: usize = 8;

/// Seeded random instance with `A = gamma I + F F^T + (K - K^T)`,
/// `D = grad(x^T Q x / 2 + c^T x)` with `Q = G G^T + I/4`, and `C` a box, or
/// for `gamma > 0` possibly an affine subspace.
pub fn random_instance(seed: u64, dim: usize, gamma: f64) -> Result<NamedInstance> {
    if !(1..=64).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension must lie in [1, 64], got {dim}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..RANDOM_RETRIES {
        let pr = match draw_instance(&mut rng, dim, gamma) {
            Ok(pr) => pr,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match oracle_solve(&pr, 1e-12) {
            Ok(sol) if sol.check.valid => {
                return Ok(NamedInstance {
                    id: format!("random_{seed}_{dim}"),
                    instance: pr,
                    solution: SolutionSet::Point(sol.z),
                    certificate: sol.certificate,
                });
            }
            Ok(_) => last_err = Some(Error::PremiseViolated("oracle certificate failed validation".into())),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::InvalidArgument("random instance generation failed".into())))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    Matrix::from_fn(n, n, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn draw_instance(rng: &mut ChaCha8Rng, n: usize, gamma: f64) -> Result<ProblemInstance> {
    let scale = 1.0 / (n as f64).sqrt();
    let f = random_matrix(rng, n, scale);
    let k = random_matrix(rng, n, 0.5 * scale);
    let m = Matrix::identity(n, n) * gamma + &f * f.transpose() + (&k - k.transpose());
    let a = MaxMonotone::linear(m, gamma)?;

    let g = random_matrix(rng, n, scale);
    let q = &g * g.transpose() + Matrix::identity(n, n) * 0.25;
    let c = Point::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let d = Cocoercive::gradient_quadratic(q.clone(), c, 1.0 / max_sym_eigenvalue(&q))?;

    let set = if gamma > 0.0 && n > 1 && rng.random_bool(0.5) {
        let k = rng.random_range(1..n);
        let anchor = Point::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let dirs = (0..k).map(|_| Point::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
        ConvexSet::affine(anchor, dirs)?
    } else {
        let half = Point::from_fn(n, |_, _| rng.random_range(0.5..1.5));
        ConvexSet::boxed(-&half, half)?
    };
    ProblemInstance::new(a, d, Penalty::dist_sq_gradient(set, 1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_matches_hand_solution() {
        let p = builtin("P1_strongly_monotone").unwrap();
        let SolutionSet::Point(z) = &p.solution else { panic!("unique solution expected") };
        assert!((z - point(&[0.3, 0.1, 0.0, 0.0])).norm() < 1e-11);
        let gp = &p.certificate;
        assert!((&gp.v - point(&[0.7, -0.1, -0.15, -0.05])).norm() < 1e-10);
        assert!((&gp.p - point(&[0.0, 0.0, 0.15, 0.05])).norm() < 1e-10);
        assert!(gp.w.norm() < 1e-10);
        assert!(p.validate().unwrap().valid);
    }

    #[test]
    fn p3_matches_hand_solution() {
        // Coordinate 1 sits at the upper bound with p = 1, coordinate 2 at 0
        // with v = -0.7, coordinate 3 at the lower bound with p = -0.5.
        let p = builtin("P3").unwrap();
        let SolutionSet::Point(z) = &p.solution else { panic!("unique solution expected") };
        assert!((z - point(&[1.0, 0.0, -1.0])).norm() < 1e-11);
        assert!((&p.certificate.p - point(&[1.0, 0.0, -0.5])).norm() < 1e-10);
        assert!((&p.certificate.v - point(&[1.0, -0.7, -1.0])).norm() < 1e-10);
        assert!(p.validate().unwrap().valid);
    }

    #[test]
    fn p0_and_p2_certificates() {
        let p0 = builtin("P0").unwrap();
        assert!(p0.validate().unwrap().valid);
        assert_eq!(p0.solution.distance(&point(&[5.0, -7.0])).unwrap(), 0.0);
        let p2 = builtin("P2_monotone_line").unwrap();
        assert!(p2.validate().unwrap().valid);
        assert!((p2.solution.distance(&point(&[3.0, -0.25])).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn p2_every_point_of_the_line_solves() {
        let p2 = builtin("P2").unwrap();
        let d = p2.instance.d();
        for k in 0..10 {
            let s = -2.0 + 0.45 * k as f64;
            let gp = GraphPoint::new(point(&[s, 0.0]), point(&[0.0, -s]), point(&[0.0, s]), d).unwrap();
            assert!(validate_certificate(&p2.instance, &gp).unwrap().valid);
            assert!(gp.w.norm() == 0.0);
        }
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(builtin("P9"), Err(Error::UnknownInstance(_))));
    }

    #[test]
    fn oracle_on_zero_problem_returns_start() {
        let p0 = builtin("P0").unwrap();
        let sol = oracle_solve(&p0.instance, 1e-12).unwrap();
        assert_eq!(sol.z, Point::zeros(2));
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn oracle_scalar_l1_box() {
        let a = MaxMonotone::subdifferential_l1(1, 1.0).unwrap();
        let d = Cocoercive::gradient_quadratic(Matrix::identity(1, 1), point(&[-3.0]), 1.0).unwrap();
        let c = ConvexSet::boxed(point(&[-1.0]), point(&[1.0])).unwrap();
        let pr = ProblemInstance::new(a, d, Penalty::dist_sq_gradient(c, 1.0).unwrap()).unwrap();
        let sol = oracle_solve(&pr, 1e-12).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-6);
        let grid = sol.grid.unwrap();
        assert!((grid.best[0] - 1.0).abs() < 1e-6);
        assert!(sol.check.valid);
    }

    #[test]
    fn grid_agrees_on_p2() {
        let p2 = builtin("P2").unwrap();
        let sol = oracle_solve(&p2.instance, 1e-12).unwrap();
        assert!(p2.solution.distance(&sol.z).unwrap() < 1e-9);
        let grid = sol.grid.unwrap();
        assert!(grid.oracle_merit <= 1e-9);
        assert!(p2.solution.distance(&grid.best).unwrap() < 1e-6);
    }

    #[test]
    fn random_instances_are_deterministic_and_certified() {
        let a = random_instance(7, 5, 0.5).unwrap();
        let b = random_instance(7, 5, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.validate().unwrap().valid);
        assert_ne!(random_instance(8, 5, 0.5).unwrap(), a);
        assert!(random_instance(1, 0, 1.0).is_err());
        assert!(random_instance(1, 65, 1.0).is_err());
    }

    #[test]
    fn random_scalar_instance_has_closed_form() {
        let inst = random_instance(11, 1, 1.0).unwrap();
        let pr = &inst.instance;
        let MonotoneKind::Linear(m) = pr.a().kind() else { panic!("linear A expected") };
        let CocoerciveKind::GradientQuadratic { q, c } = pr.d().kind() else { panic!("quadratic D expected") };
        let SetKind::Box { lo, hi } = pr.constraint_set().kind() else { panic!("box expected") };
        let z = (-c[0] / (m[(0, 0)] + q[(0, 0)])).clamp(lo[0], hi[0]);
        let SolutionSet::Point(got) = &inst.solution else { panic!("unique solution expected") };
        assert!((got[0] - z).abs() < 1e-10);
    }
}
