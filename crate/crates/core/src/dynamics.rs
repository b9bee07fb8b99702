//! Time integration of `x' = J_{lambda(t) A}(x - lambda(t) D x - lambda(t) beta(t) B x) - x`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, check_finite, Point};
use crate::operators::{Cocoercive, ConvexSet, ForwardOperator, MaxMonotone, Penalty};
use crate::schedules::Schedule;

/// The data `(A, D, B)` of the constrained inclusion `0 in Ax + Dx + N_C(x)`
/// with `C = zer B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    a: MaxMonotone,
    d: Cocoercive,
    b: Penalty,
    /// A point of `C`.
    witness: Point,
}

impl ProblemInstance {
    pub fn new(a: MaxMonotone, d: Cocoercive, b: Penalty) -> Result<Self> {
        let n = a.dim();
        for got in [d.dim(), b.dim()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        let witness = b.zero_set().project(&Point::zeros(n))?;
        Ok(Self { a, d, b, witness })
    }

    pub fn a(&self) -> &MaxMonotone {
        &self.a
    }
    pub fn d(&self) -> &Cocoercive {
        &self.d
    }
    pub fn b(&self) -> &Penalty {
        &self.b
    }
    /// `C = zer B`.
    pub fn constraint_set(&self) -> &ConvexSet {
        self.b.zero_set()
    }
    pub fn dim(&self) -> usize {
        self.a.dim()
    }
    pub fn eta(&self) -> f64 {
        self.d.modulus()
    }
    pub fn mu(&self) -> f64 {
        self.b.mu()
    }
    pub fn witness(&self) -> &Point {
        &self.witness
    }

    /// `J_{lambda A}(x - lambda D x - lambda beta B x)`; shared by the continuous
    /// and the discrete schemes so both run the same arithmetic.
    pub(crate) fn forward_backward(&self, lambda: f64, beta: f64, x: &Point) -> Result<Point> {
        let dx = self.d.apply_unchecked(x);
        let bx = self.b.apply_unchecked(x);
        let arg = x - dx * lambda - bx * (lambda * beta);
        self.a.resolvent(lambda, &arg)
    }
}

/// `f(t, x)`, the exact right-hand side.
pub fn rhs(pr: &ProblemInstance, s: &Schedule, t: f64, x: &Point) -> Result<Point> {
    check_dim(pr.dim(), x)?;
    check_finite(x, "state")?;
    let j = pr.forward_backward(s.lambda(t), s.beta(t), x)?;
    Ok(j - x)
}

/// `L_f(t) = 2 + lambda(t)/eta + lambda(t) beta(t)/mu`, a Lipschitz constant of `f(t, .)`.
pub fn lipschitz_bound(pr: &ProblemInstance, s: &Schedule, t: f64) -> f64 {
    let lambda = s.lambda(t);
    2.0 + lambda / pr.eta() + lambda * s.beta(t) / pr.mu()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub method: Method,
    pub h_max: f64,
    /// Accepted steps satisfy `h L_f(t) <= safety`.
    pub safety: f64,
    /// Record every k-th step; 0 picks k so that at most 10^6 nodes are kept.
    pub record_every: usize,
    /// Reference point `z` for `int lambda beta <Bx, x - z>` and distances.
    pub reference: Option<Point>,
    /// Bypasses step control and takes `h = 1` steps, reproducing the discrete scheme.
    pub force_unit_step: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { method: Method::Rk4, h_max: 0.05, safety: 0.25, record_every: 0, reference: None, force_unit_step: false }
    }
}

/// Running integrals at a recorded node, accumulated by the trapezoid rule at
/// every integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningIntegrals {
    /// `int lambda`.
    pub lambda: f64,
    /// `int lambda x`, componentwise.
    pub lambda_x: Point,
    /// `int ||x'||^2`.
    pub deriv_sq: f64,
    /// `int lambda beta ||Bx||^2`.
    pub penalty_sq: f64,
    /// `int lambda beta <Bx, x - z>`, when a reference `z` is set.
    pub penalty_inner: Option<f64>,
}

impl RunningIntegrals {
    fn zero(dim: usize, with_reference: bool) -> Self {
        Self {
            lambda: 0.0,
            lambda_x: Point::zeros(dim),
            deriv_sq: 0.0,
            penalty_sq: 0.0,
            penalty_inner: with_reference.then_some(0.0),
        }
    }
}

/// Pointwise integrands at one time.
#[derive(Debug, Clone)]
struct NodeSample {
    t: f64,
    x: Point,
    f: Point,
    lambda: f64,
    beta: f64,
    bx: Point,
}

impl NodeSample {
    fn penalty_inner(&self, z: Option<&Point>) -> Option<f64> {
        z.map(|z| self.lambda * self.beta * self.bx.dot(&(&self.x - z)))
    }
}

fn accumulate(acc: &mut RunningIntegrals, a: &NodeSample, b: &NodeSample, z: Option<&Point>) {
    let h = b.t - a.t;
    let half = 0.5 * h;
    acc.lambda += half * (a.lambda + b.lambda);
    acc.lambda_x += (&a.x * a.lambda + &b.x * b.lambda) * half;
    acc.deriv_sq += half * (a.f.norm_squared() + b.f.norm_squared());
    acc.penalty_sq += half * (a.lambda * a.beta * a.bx.norm_squared() + b.lambda * b.beta * b.bx.norm_squared());
    if let (Some(v), Some(ia), Some(ib)) = (acc.penalty_inner.as_mut(), a.penalty_inner(z), b.penalty_inner(z)) {
        *v += half * (ia + ib);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegrationStats {
    pub steps: usize,
    /// Largest `h_k L_f(t_k)` over accepted steps.
    pub max_step_lipschitz: f64,
}

/// A recorded solution path. All per-node lists share one length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    /// Exact right-hand side `f(t_k, x_k)`.
    pub derivs: Vec<Point>,
    pub lambda_samples: Vec<f64>,
    pub beta_samples: Vec<f64>,
    /// `||B x_k||`.
    pub penalty_norms: Vec<f64>,
    pub integrals: Vec<RunningIntegrals>,
    pub reference: Option<Point>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    fn empty(reference: Option<Point>) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
            lambda_samples: Vec::new(),
            beta_samples: Vec::new(),
            penalty_norms: Vec::new(),
            integrals: Vec::new(),
            reference,
            stats: IntegrationStats::default(),
        }
    }

    fn record(&mut self, node: &NodeSample, acc: &RunningIntegrals) {
        self.times.push(node.t);
        self.states.push(node.x.clone());
        self.derivs.push(node.f.clone());
        self.lambda_samples.push(node.lambda);
        self.beta_samples.push(node.beta);
        self.penalty_norms.push(node.bx.norm());
        self.integrals.push(acc.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Point::len)
    }

    /// Rebuilds a trajectory from recorded times and states, recomputing the
    /// exact right-hand side and trapezoid integrals on the given nodes.
    pub fn from_nodes(
        pr: &ProblemInstance,
        s: &Schedule,
        times: Vec<f64>,
        states: Vec<Point>,
        reference: Option<Point>,
    ) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidArgument("times and states must be nonempty and aligned".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let z = reference.as_ref();
        let mut tr = Self::empty(reference.clone());
        let mut acc = RunningIntegrals::zero(pr.dim(), z.is_some());
        let mut prev: Option<NodeSample> = None;
        for (t, x) in times.into_iter().zip(states) {
            let node = sample_node(pr, s, t, x)?;
            if let Some(p) = &prev {
                accumulate(&mut acc, p, &node, z);
            }
            tr.record(&node, &acc);
            prev = Some(node);
        }
        Ok(tr)
    }

    /// Trajectory from arbitrary per-node data, with trapezoid integrals
    /// computed on the nodes. Penalty vectors are given directly.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<Point>,
        derivs: Vec<Point>,
        lambdas: Vec<f64>,
        betas: Vec<f64>,
        penalties: Vec<Point>,
        reference: Option<Point>,
    ) -> Result<Self> {
        let n = times.len();
        if [states.len(), derivs.len(), lambdas.len(), betas.len(), penalties.len()].iter().any(|&l| l != n) || n == 0 {
            return Err(Error::InvalidArgument("trajectory parts must be nonempty and aligned".into()));
        }
        let dim = states[0].len();
        let z = reference.as_ref();
        let mut tr = Self::empty(reference.clone());
        let mut acc = RunningIntegrals::zero(dim, z.is_some());
        let mut prev: Option<NodeSample> = None;
        for i in 0..n {
            let node = NodeSample {
                t: times[i],
                x: states[i].clone(),
                f: derivs[i].clone(),
                lambda: lambdas[i],
                beta: betas[i],
                bx: penalties[i].clone(),
            };
            if let Some(p) = &prev {
                accumulate(&mut acc, p, &node, z);
            }
            tr.record(&node, &acc);
            prev = Some(node);
        }
        Ok(tr)
    }

    /// Writes `t,x_0..x_{n-1},rhs_norm,lambda,beta,B_norm[,dist_to_z]`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.extend(["rhs_norm", "lambda", "beta", "B_norm"].map(String::from));
        if self.reference.is_some() {
            header.push("dist_to_z".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row: Vec<String> = vec![fmt_f64(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(self.derivs[k].norm()));
            row.push(fmt_f64(self.lambda_samples[k]));
            row.push(fmt_f64(self.beta_samples[k]));
            row.push(fmt_f64(self.penalty_norms[k]));
            if let Some(z) = &self.reference {
                row.push(fmt_f64((&self.states[k] - z).norm()));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Times and states read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCsv {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
}

/// Parses the `t` and `x_i` columns of a trajectory CSV.
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<TrajectoryCsv> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory CSV".into()))?
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(Error::InvalidArgument("trajectory CSV must start with a `t` column".into()));
    }
    let dim = cols.iter().filter(|c| c.starts_with("x_")).count();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", lineno + 2)))?;
        if vals.len() != cols.len() {
            return Err(Error::InvalidArgument(format!("row {} has {} fields", lineno + 2, vals.len())));
        }
        times.push(vals[0]);
        states.push(Point::from_column_slice(&vals[1..=dim]));
    }
    Ok(TrajectoryCsv { times, states })
}

fn sample_node(pr: &ProblemInstance, s: &Schedule, t: f64, x: Point) -> Result<NodeSample> {
    let f = rhs(pr, s, t, &x)?;
    let bx = pr.b().apply_unchecked(&x);
    Ok(NodeSample { t, lambda: s.lambda(t), beta: s.beta(t), f, bx, x })
}

/// Advances the strong solution from `x0` to `t_end` with an explicit
/// one-step method and Lipschitz-based step control
/// `h_k = min(h_max, safety / L_f(t_k))`.
pub fn integrate(
    pr: &ProblemInstance,
    s: &Schedule,
    x0: &Point,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_dim(pr.dim(), x0)?;
    check_finite(x0, "initial state")?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be > 0, got {t_end}")));
    }
    if !(opts.safety > 0.0 && opts.safety <= 1.0) {
        return Err(Error::InvalidArgument(format!("safety must lie in (0, 1], got {}", opts.safety)));
    }
    if !opts.force_unit_step && !(opts.h_max > 0.0) {
        return Err(Error::InvalidArgument(format!("h_max must be > 0, got {}", opts.h_max)));
    }
    let record_every = if opts.record_every > 0 {
        opts.record_every
    } else {
        let h0 = opts.h_max.min(opts.safety / lipschitz_bound(pr, s, 0.0));
        ((t_end / h0) / 1e6).ceil().max(1.0) as usize
    };

    let z = opts.reference.as_ref();
    let mut tr = Trajectory::empty(opts.reference.clone());
    let mut acc = RunningIntegrals::zero(pr.dim(), z.is_some());
    let mut node = sample_node(pr, s, 0.0, x0.clone())?;
    tr.record(&node, &acc);

    let mut step = 0usize;
    let mut max_hl: f64 = 0.0;
    while node.t < t_end {
        let t = node.t;
        let lf = lipschitz_bound(pr, s, t);
        let mut h = if opts.force_unit_step { 1.0 } else { opts.h_max.min(opts.safety / lf) };
        // Land exactly on t_end; avoid a sliver step at the end.
        if t + h >= t_end || (!opts.force_unit_step && t_end - (t + h) < 1e-9 * h) {
            h = t_end - t;
        }
        let x = &node.x;
        let next_x = match opts.method {
            Method::Euler => x + &node.f * h,
            Method::Rk4 => {
                let k1 = &node.f;
                let k2 = rhs(pr, s, t + 0.5 * h, &(x + k1 * (0.5 * h)))?;
                let k3 = rhs(pr, s, t + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
                let k4 = rhs(pr, s, t + h, &(x + &k3 * h))?;
                x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
            }
        };
        if next_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { last_valid_time: t });
        }
        let t_next = if opts.force_unit_step { (step + 1) as f64 } else { t + h };
        let next = sample_node(pr, s, t_next.min(t_end), next_x)?;
        accumulate(&mut acc, &node, &next, z);
        max_hl = max_hl.max(h * lf);
        step += 1;
        node = next;
        if step.is_multiple_of(record_every) || node.t >= t_end {
            tr.record(&node, &acc);
        }
    }
    tr.stats = IntegrationStats { steps: step, max_step_lipschitz: max_hl };
    Ok(tr)
}

/// `x~(t) = int_0^t lambda x / int_0^t lambda` at every recorded node; the
/// first node is `x(0)`.
pub fn ergodic_average(tr: &Trajectory) -> Result<Vec<Point>> {
    if tr.len() < 2 {
        return Err(Error::InvalidArgument("ergodic average needs at least two nodes".into()));
    }
    tr.integrals
        .iter()
        .zip(&tr.states)
        .enumerate()
        .map(|(k, (acc, x))| {
            if k == 0 {
                Ok(x.clone())
            } else if acc.lambda > 0.0 {
                Ok(&acc.lambda_x / acc.lambda)
            } else {
                Err(Error::InvalidArgument("integral of lambda vanishes".into()))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;

    fn scalar_decay() -> ProblemInstance {
        let b = Penalty::dist_sq_gradient(ConvexSet::singleton(point(&[0.0])), 1.0).unwrap();
        ProblemInstance::new(MaxMonotone::zero(1), Cocoercive::zero(1, 1.0).unwrap(), b).unwrap()
    }

    fn all_zero(n: usize) -> ProblemInstance {
        let b = Penalty::dist_sq_gradient(ConvexSet::whole_space(n), 1.0).unwrap();
        ProblemInstance::new(MaxMonotone::zero(n), Cocoercive::zero(n, 1.0).unwrap(), b).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let f = rhs(&scalar_decay(), &Schedule::canonical(), 0.0, &point(&[2.0])).unwrap();
        assert_eq!(f, point(&[-2.0]));
        let f0 = rhs(&all_zero(3), &Schedule::canonical(), 4.0, &point(&[1.0, -2.0, 3.0])).unwrap();
        assert_eq!(f0, Point::zeros(3));
        assert!(rhs(&all_zero(3), &Schedule::canonical(), 0.0, &point(&[f64::NAN, 0.0, 0.0])).is_err());
    }

    #[test]
    fn lipschitz_bound_examples() {
        assert_eq!(lipschitz_bound(&scalar_decay(), &Schedule::canonical(), 0.0), 4.0);
        let b = Penalty::dist_sq_gradient(ConvexSet::singleton(point(&[0.0])), 0.25).unwrap();
        let pr = ProblemInstance::new(MaxMonotone::zero(1), Cocoercive::zero(1, 0.5).unwrap(), b).unwrap();
        // lambda = 0.1 at t = 9 with c_l = 1, p = 1; lambda beta = 0.1 with beta = 1.
        let s = Schedule::new(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((lipschitz_bound(&pr, &s, 9.0) - 2.6).abs() < 1e-15);
        let late = lipschitz_bound(&pr, &Schedule::new(1.0, 1.0, 1.0, 0.5).unwrap(), 1e12);
        assert!((late - 2.0).abs() < 1e-5);
    }

    #[test]
    fn zero_dynamics_is_stationary() {
        let x0 = point(&[0.5, -1.5]);
        let tr = integrate(&all_zero(2), &Schedule::canonical(), &x0, 3.0, &IntegrateOptions::default()).unwrap();
        assert!(tr.states.iter().all(|x| *x == x0));
        assert_eq!(*tr.times.last().unwrap(), 3.0);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let opts = IntegrateOptions { h_max: 0.01, record_every: 1, ..IntegrateOptions::default() };
        let tr = integrate(&scalar_decay(), &Schedule::canonical(), &point(&[1.0]), 5.0, &opts).unwrap();
        let exact = (-5.0f64).exp();
        let got = tr.states.last().unwrap()[0];
        assert!(((got - exact) / exact).abs() < 1e-6);
        assert!(tr.stats.max_step_lipschitz <= opts.safety + 1e-15);
    }

    #[test]
    fn recorded_lists_are_aligned_and_monotone() {
        let opts = IntegrateOptions { record_every: 7, reference: Some(point(&[0.0])), ..IntegrateOptions::default() };
        let tr = integrate(&scalar_decay(), &Schedule::canonical(), &point(&[3.0]), 4.0, &opts).unwrap();
        let n = tr.len();
        assert!([tr.states.len(), tr.derivs.len(), tr.lambda_samples.len(), tr.integrals.len()].iter().all(|&l| l == n));
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.integrals.windows(2).all(|w| w[1].lambda >= w[0].lambda
            && w[1].deriv_sq >= w[0].deriv_sq
            && w[1].penalty_sq >= w[0].penalty_sq));
        assert!(tr.integrals.last().unwrap().penalty_inner.unwrap() > 0.0);
    }

    #[test]
    fn blow_up_and_bad_arguments() {
        let opts = IntegrateOptions::default();
        assert!(integrate(&scalar_decay(), &Schedule::canonical(), &point(&[1.0]), 0.0, &opts).is_err());
        let bad = IntegrateOptions { safety: 1.5, ..IntegrateOptions::default() };
        assert!(integrate(&scalar_decay(), &Schedule::canonical(), &point(&[1.0]), 1.0, &bad).is_err());
        assert!(integrate(&scalar_decay(), &Schedule::canonical(), &point(&[1.0, 2.0]), 1.0, &opts).is_err());
    }

    #[test]
    fn ergodic_average_of_constant_is_constant() {
        let c = point(&[2.0, -1.0]);
        let tr = integrate(&all_zero(2), &Schedule::canonical(), &c, 10.0, &IntegrateOptions::default()).unwrap();
        for avg in ergodic_average(&tr).unwrap() {
            assert!((avg - &c).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip_of_columns() {
        let opts = IntegrateOptions { record_every: 5, reference: Some(point(&[0.0])), ..IntegrateOptions::default() };
        let tr = integrate(&scalar_decay(), &Schedule::canonical(), &point(&[1.0]), 1.0, &opts).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,rhs_norm,lambda,beta,B_norm,dist_to_z\n"));
        let back = read_trajectory_csv(&buf[..]).unwrap();
        assert_eq!(back.times, tr.times);
        assert_eq!(back.states, tr.states);
    }
}
