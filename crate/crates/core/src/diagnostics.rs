//! Numerical checks of the Lyapunov inequalities and of the convergence
//! behaviour along computed trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ergodic_average, ProblemInstance, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, Point};
use crate::operators::{fitzpatrick_gap_bound, ForwardOperator, GraphPoint};
use crate::problems::SolutionSet;
use crate::schedules::{lambda_beta_limsup_bound_time, Schedule};
use crate::tolerances::Tolerances;

/// Constants of the long-time Lyapunov inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    /// Strictly between `limsup lambda beta` and `2 mu`.
    pub alpha: f64,
    pub eps0: f64,
    pub a: f64,
    pub b: f64,
    /// Time after which `lambda beta <= alpha`.
    pub t0: f64,
}

/// `a = eps/(2(1+eps))`, `b = 4(1+eps)/eps`.
pub fn constants_for_eps(eps: f64) -> (f64, f64) {
    (eps / (2.0 * (1.0 + eps)), 4.0 * (1.0 + eps) / eps)
}

/// `(1+eps) alpha - 2 mu/(1+eps) + eps/(1+eps)`, increasing in `eps`.
fn eps_condition(alpha: f64, mu: f64, eps: f64) -> f64 {
    (1.0 + eps) * alpha - 2.0 * mu / (1.0 + eps) + eps / (1.0 + eps)
}

/// Largest `eps` in `(0, hi]` found by 40 bisection steps with a negative
/// condition value, or `hi` itself when the whole window is feasible.
fn feasible_bound(alpha: f64, mu: f64, hi: f64) -> Option<f64> {
    if eps_condition(alpha, mu, hi) < 0.0 {
        return Some(hi);
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + up);
        if eps_condition(alpha, mu, mid) < 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    (lo > 0.0).then_some(lo)
}

/// Picks `alpha = (limsup lambda beta + 2 mu)/2` and `eps0` as the midpoint of
/// the feasible interval of the eps-condition within `(0, 1]`.
pub fn choose_lemma_constants(s: &Schedule, mu: f64) -> Result<LemmaConstants> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be > 0, got {mu}")));
    }
    let limsup = s.product_limsup();
    if !(limsup < 2.0 * mu) {
        return Err(Error::PremiseViolated(format!("limsup lambda*beta = {limsup} is not below 2*mu = {}", 2.0 * mu)));
    }
    let alpha = 0.5 * (limsup + 2.0 * mu);
    let bound = feasible_bound(alpha, mu, 1.0)
        .or_else(|| feasible_bound(alpha, mu, 1e-3))
        .ok_or_else(|| Error::PremiseViolated("no feasible eps0 found".into()))?;
    let eps0 = 0.5 * bound;
    let (a, b) = constants_for_eps(eps0);
    let t0 = lambda_beta_limsup_bound_time(s, mu)?;
    Ok(LemmaConstants { alpha, eps0, a, b, t0 })
}

/// Smallest `t >= t0` with `lambda(t) <= 2 eta / b`.
pub fn t1_threshold(s: &Schedule, eta: f64, b: f64, t0: f64) -> Result<f64> {
    if !(eta > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("eta and b must be > 0, got {eta}, {b}")));
    }
    let target = 2.0 * eta / b;
    if s.c_lambda() <= target {
        return Ok(t0.max(0.0));
    }
    if s.p() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let t = (s.c_lambda() / target).powf(1.0 / s.p()) - 1.0;
    Ok(t0.max(t).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    Fej1,
    Fej4,
}

/// Terms of the two inequalities; a mutated check flips the sign of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaTerm {
    /// `d/dt ||x - z||^2`.
    Derivative,
    /// `lambda (2 eta - 3 lambda) ||Dx - Dz||^2` (fej1).
    Cocoercivity,
    /// `a ||x'||^2` (fej4).
    Velocity,
    /// `a lambda beta/2 <x - z, Bx>` (fej4).
    PenaltyInner,
    /// `3 lambda^2 beta^2 ||Bx||^2` (fej1) or `a lambda beta ||Bx||^2` (fej4).
    PenaltySq,
    /// Fitzpatrick gap term.
    Gap,
    /// `3 lambda^2 ||Dz + v||^2` (fej1) or `b lambda^2 ||Dz + v||^2` (fej4).
    Residual,
    /// `2 lambda <z - x, w>`.
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub lemma_id: LemmaId,
    pub grid_times: Vec<f64>,
    pub lhs_values: Vec<f64>,
    pub rhs_values: Vec<f64>,
    pub violation_fraction: f64,
    /// Largest `lhs - rhs` over the grid, floored at 0.
    pub max_violation: f64,
    pub t1_used: f64,
    pub a_used: Option<f64>,
    pub b_used: Option<f64>,
    pub eps0_used: Option<f64>,
    pub mutation: Option<LemmaTerm>,
}

impl LyapunovReport {
    pub fn violations(&self) -> usize {
        self.lhs_values.iter().zip(&self.rhs_values).filter(|(l, r)| is_violation(**l, **r)).count()
    }
}

fn is_violation(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + Tolerances::DEFAULT.lyapunov_rel * (1.0 + rhs.abs())
}

/// Signed sum of named terms, flipping `flip` when present.
fn side(terms: &[(LemmaTerm, f64)], flip: Option<LemmaTerm>) -> f64 {
    terms.iter().map(|(k, v)| if Some(*k) == flip { -v } else { *v }).sum()
}

struct NodeTerms {
    lam: f64,
    beta: f64,
    x_minus_z: Point,
    f: Point,
    bx: Point,
    dx_minus_dz: Point,
}

fn check_inputs(tr: &Trajectory, gp: &GraphPoint, pr: &ProblemInstance) -> Result<()> {
    if tr.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    check_dim(pr.dim(), &gp.z)?;
    check_dim(pr.dim(), &tr.states[0])
}

fn node_terms(tr: &Trajectory, k: usize, gp: &GraphPoint, pr: &ProblemInstance, dz: &Point) -> NodeTerms {
    let x = &tr.states[k];
    NodeTerms {
        lam: tr.lambda_samples[k],
        beta: tr.beta_samples[k],
        x_minus_z: x - &gp.z,
        f: tr.derivs[k].clone(),
        bx: pr.b().apply_unchecked(x),
        dx_minus_dz: pr.d().apply_unchecked(x) - dz,
    }
}

fn finish(
    lemma_id: LemmaId,
    grid_times: Vec<f64>,
    lhs_values: Vec<f64>,
    rhs_values: Vec<f64>,
    t1_used: f64,
    constants: Option<&LemmaConstants>,
    mutation: Option<LemmaTerm>,
) -> Result<LyapunovReport> {
    if grid_times.is_empty() {
        return Err(Error::InvalidArgument(format!("no trajectory nodes at or after t1 = {t1_used}")));
    }
    let count = lhs_values.iter().zip(&rhs_values).filter(|(l, r)| is_violation(**l, **r)).count();
    let max_violation = lhs_values.iter().zip(&rhs_values).map(|(l, r)| l - r).fold(0.0, f64::max);
    Ok(LyapunovReport {
        lemma_id,
        violation_fraction: count as f64 / grid_times.len() as f64,
        grid_times,
        lhs_values,
        rhs_values,
        max_violation,
        t1_used,
        a_used: constants.map(|c| c.a),
        b_used: constants.map(|c| c.b),
        eps0_used: constants.map(|c| c.eps0),
        mutation,
    })
}

/// Evaluates both sides of the short-time inequality at every node, with the
/// exact derivative `2 <x - z, f(t, x)>` and the gap term replaced by its
/// closed-form upper bound.
pub fn check_lemma_fej1(
    tr: &Trajectory,
    gp: &GraphPoint,
    pr: &ProblemInstance,
    mutation: Option<LemmaTerm>,
) -> Result<LyapunovReport> {
    use LemmaTerm::*;
    check_inputs(tr, gp, pr)?;
    if let Some(m) = mutation {
        if matches!(m, Velocity | PenaltyInner) {
            return Err(Error::InvalidArgument(format!("{m:?} is not a term of this inequality")));
        }
    }
    let eta = pr.eta();
    let dz = pr.d().apply_unchecked(&gp.z);
    let residual_sq = (&dz + &gp.v).norm_squared();
    let n = tr.len();
    let (mut lhs, mut rhs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let nt = node_terms(tr, k, gp, pr, &dz);
        let (lam, beta) = (nt.lam, nt.beta);
        let gap = fitzpatrick_gap_bound(pr.b(), &gp.p, beta)?;
        lhs.push(side(
            &[
                (Derivative, 2.0 * nt.x_minus_z.dot(&nt.f)),
                (Cocoercivity, lam * (2.0 * eta - 3.0 * lam) * nt.dx_minus_dz.norm_squared()),
            ],
            mutation,
        ));
        rhs.push(side(
            &[
                (Gap, 2.0 * lam * beta * gap),
                (PenaltySq, 3.0 * lam * lam * beta * beta * nt.bx.norm_squared()),
                (Residual, 3.0 * lam * lam * residual_sq),
                (Graph, -2.0 * lam * nt.x_minus_z.dot(&gp.w)),
            ],
            mutation,
        ));
    }
    finish(LemmaId::Fej1, tr.times.clone(), lhs, rhs, 0.0, None, mutation)
}

/// Evaluates both sides of the long-time inequality at every node with
/// `t >= t1`, the gap term taken at `4p/(a beta(t))`.
pub fn check_lemma_fej4(
    tr: &Trajectory,
    gp: &GraphPoint,
    pr: &ProblemInstance,
    constants: &LemmaConstants,
    t1: f64,
    mutation: Option<LemmaTerm>,
) -> Result<LyapunovReport> {
    use LemmaTerm::*;
    check_inputs(tr, gp, pr)?;
    if mutation == Some(Cocoercivity) {
        return Err(Error::InvalidArgument("Cocoercivity is not a term of this inequality".into()));
    }
    let (a, b) = (constants.a, constants.b);
    let dz = pr.d().apply_unchecked(&gp.z);
    let residual_sq = (&dz + &gp.v).norm_squared();
    let (mut times, mut lhs, mut rhs) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..tr.len() {
        let t = tr.times[k];
        if t < t1 {
            continue;
        }
        let nt = node_terms(tr, k, gp, pr, &dz);
        let (lam, beta) = (nt.lam, nt.beta);
        let lb = lam * beta;
        let gap = fitzpatrick_gap_bound(pr.b(), &gp.p, a * beta / 4.0)?;
        times.push(t);
        lhs.push(side(
            &[
                (Derivative, 2.0 * nt.x_minus_z.dot(&nt.f)),
                (Velocity, a * nt.f.norm_squared()),
                (PenaltyInner, a * 0.5 * lb * nt.x_minus_z.dot(&nt.bx)),
                (PenaltySq, a * lb * nt.bx.norm_squared()),
            ],
            mutation,
        ));
        rhs.push(side(
            &[
                (Gap, 0.5 * a * lb * gap),
                (Graph, -2.0 * lam * nt.x_minus_z.dot(&gp.w)),
                (Residual, b * lam * lam * residual_sq),
            ],
            mutation,
        ));
    }
    finish(LemmaId::Fej4, times, lhs, rhs, t1, Some(constants), mutation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `max - min` of `||x(t) - z||` over `[T/10, T]`.
    pub dist_tail_oscillation: f64,
    /// Share of each running integral accumulated over `[T/10, T]`.
    pub integral_tails: BTreeMap<String, f64>,
    pub ergodic_dist_to_solution: f64,
    /// Final distance to the solution, when it is unique.
    pub strong_dist_final: Option<f64>,
}

/// Minimal horizon for a convergence report: two decades above `t = 1`.
pub const MIN_REPORT_HORIZON: f64 = 100.0;

/// Linear interpolation of a running integral at time `t`.
fn integral_at(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[k - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

fn tail_ratio(times: &[f64], values: &[f64]) -> f64 {
    let total = *values.last().unwrap_or(&0.0);
    if total == 0.0 {
        return 0.0;
    }
    let t_end = *times.last().unwrap_or(&0.0);
    let early = integral_at(times, values, t_end / 10.0);
    ((total - early) / total).abs()
}

/// Summarizes the long-time behaviour of `tr` relative to the reference point
/// `z` and the solution set.
pub fn convergence_report(tr: &Trajectory, solution: &SolutionSet, z: &Point) -> Result<ConvergenceReport> {
    let t_end = *tr.times.last().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    if t_end < MIN_REPORT_HORIZON || tr.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "trajectory too short: t_end = {t_end} < {MIN_REPORT_HORIZON} or fewer than 3 nodes"
        )));
    }
    check_dim(tr.dim(), z)?;
    let tail_start = t_end / 10.0;
    let dists: Vec<f64> = tr
        .times
        .iter()
        .zip(&tr.states)
        .filter(|(t, _)| **t >= tail_start)
        .map(|(_, x)| (x - z).norm())
        .collect();
    let max = dists.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);

    let mut integral_tails = BTreeMap::new();
    let series = |f: &dyn Fn(&crate::dynamics::RunningIntegrals) -> f64| -> Vec<f64> {
        tr.integrals.iter().map(f).collect()
    };
    integral_tails.insert("deriv_sq".to_string(), tail_ratio(&tr.times, &series(&|r| r.deriv_sq)));
    integral_tails.insert("penalty_sq".to_string(), tail_ratio(&tr.times, &series(&|r| r.penalty_sq)));
    if tr.integrals[0].penalty_inner.is_some() {
        let inner = series(&|r| r.penalty_inner.unwrap_or(0.0));
        integral_tails.insert("penalty_inner".to_string(), tail_ratio(&tr.times, &inner));
    }

    let ergodic = ergodic_average(tr)?;
    let final_avg = ergodic.last().expect("nonempty");
    let ergodic_dist_to_solution = solution.distance(final_avg)?;
    let strong_dist_final = match solution {
        SolutionSet::Point(zs) => Some((tr.states.last().expect("nonempty") - zs).norm()),
        SolutionSet::Set(_) | SolutionSet::Representative(_) => None,
    };
    Ok(ConvergenceReport {
        dist_tail_oscillation: max - min,
        integral_tails,
        ergodic_dist_to_solution,
        strong_dist_final,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub violation_fraction: f64,
    pub max_violation: f64,
    pub t1: f64,
}

impl From<&LyapunovReport> for LemmaSummary {
    fn from(r: &LyapunovReport) -> Self {
        Self { violation_fraction: r.violation_fraction, max_violation: r.max_violation, t1: r.t1_used }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub dist_tail_oscillation: f64,
    pub integral_tails: BTreeMap<String, f64>,
    pub ergodic_dist: f64,
    pub strong_dist: Option<f64>,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self {
            dist_tail_oscillation: r.dist_tail_oscillation,
            integral_tails: r.integral_tails.clone(),
            ergodic_dist: r.ergodic_dist_to_solution,
            strong_dist: r.strong_dist_final,
        }
    }
}

/// The JSON diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub lemma_checks: BTreeMap<String, LemmaSummary>,
    pub convergence: Option<ConvergenceSummary>,
}

impl DiagnosticsReport {
    pub fn new(fej1: Option<&LyapunovReport>, fej4: Option<&LyapunovReport>, conv: Option<&ConvergenceReport>) -> Self {
        let mut lemma_checks = BTreeMap::new();
        if let Some(r) = fej1 {
            lemma_checks.insert("fej1".to_string(), r.into());
        }
        if let Some(r) = fej4 {
            lemma_checks.insert("fej4".to_string(), r.into());
        }
        Self { lemma_checks, convergence: conv.map(Into::into) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
