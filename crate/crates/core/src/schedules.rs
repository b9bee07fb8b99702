//! Power-law parameter schedules `lambda(t) = c_l (1+t)^(-p)`,
//! `beta(t) = c_b (1+t)^q` and their hypothesis classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// The pair `(lambda(.), beta(.))`. Positive and continuous on every compact
/// interval by construction, and `liminf lambda = 0` since `p > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    c_lambda: f64,
    p: f64,
    c_beta: f64,
    q: f64,
}

impl Schedule {
    pub fn new(c_lambda: f64, p: f64, c_beta: f64, q: f64) -> Result<Self> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(c_lambda) || !positive(p) || !positive(c_beta) || !(q >= 0.0 && q.is_finite()) {
            return Err(Error::InvalidDescriptor(format!(
                "schedule requires c_lambda > 0, p > 0, c_beta > 0, q >= 0 (got {c_lambda}, {p}, {c_beta}, {q})"
            )));
        }
        Ok(Self { c_lambda, p, c_beta, q })
    }

    /// `lambda(t) = 1/(t+1)`, `beta(t) = 1+t`.
    pub fn canonical() -> Self {
        Self { c_lambda: 1.0, p: 1.0, c_beta: 1.0, q: 1.0 }
    }

    pub fn c_lambda(&self) -> f64 {
        self.c_lambda
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.c_lambda * (1.0 + t).powf(-self.p)
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.c_beta * (1.0 + t).powf(self.q)
    }

    pub fn eval_lambda(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.lambda(t))
    }

    pub fn eval_beta(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.beta(t))
    }

    /// `limsup_{t -> inf} lambda(t) beta(t)`.
    pub fn product_limsup(&self) -> f64 {
        if self.q < self.p {
            0.0
        } else if self.q == self.p {
            self.c_lambda * self.c_beta
        } else {
            f64::INFINITY
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// A boolean verdict with the analytic criterion that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub criterion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HfitzStatus {
    Holds,
    Fails,
    /// No gap formula is available for the penalty kind.
    Unverified,
}

/// Quadrature cross-check of one integrability verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericCheck {
    pub name: String,
    /// Decay exponent `k` of the integrand `~ (1+t)^(-k)`.
    pub exponent: f64,
    /// Integral over `[0, T]`.
    pub value: f64,
    /// Value on `[0, T]` over value on `[0, 10^3]`.
    pub growth_ratio: f64,
    /// Increment over the last decade of `1+t` divided by the previous one.
    pub decade_ratio: f64,
    pub analytic_convergent: bool,
    pub numeric_convergent: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: Verdict,
    pub h3_l2: Verdict,
    pub h3_not_l1: Verdict,
    /// `+inf` is serialized as `null`.
    pub product_limsup: Option<f64>,
    pub product_ok: Verdict,
    pub hfitz_distsq_ok: HfitzStatus,
    pub hfitz_criterion: String,
    pub numeric_cross_checks: Vec<NumericCheck>,
}

impl HypothesisReport {
    pub fn product_limsup_value(&self) -> f64 {
        self.product_limsup.unwrap_or(f64::INFINITY)
    }

    /// (H1), (H3) and the product bound, excluding (H_fitz).
    pub fn core_hypotheses_ok(&self) -> bool {
        self.h1.ok && self.h3_l2.ok && self.h3_not_l1.ok && self.product_ok.ok
    }

    pub fn numeric_agrees(&self) -> bool {
        self.numeric_cross_checks.iter().all(|c| c.agrees)
    }

    /// Human-readable list of failed hypotheses.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.h3_l2.ok {
            out.push("H3 violated: λ ∉ L²".to_string());
        }
        if !self.h3_not_l1.ok {
            out.push("H3 violated: λ ∈ L¹".to_string());
        }
        if !self.product_ok.ok {
            out.push("limsup λβ < 2μ violated".to_string());
        }
        if self.hfitz_distsq_ok == HfitzStatus::Fails {
            out.push("H_fitz violated: ∫ λ/β = +∞".to_string());
        }
        out
    }
}

/// Horizon of the quadrature cross-checks.
pub const QUADRATURE_HORIZON: f64 = 1e6;
const QUADRATURE_REL_TOL: f64 = 1e-8;
/// A decade ratio at or above this value marks a divergent integral.
const DIVERGENT_DECADE_RATIO: f64 = 1.0 - 1e-6;

/// Integral of `g` over `[0, horizon]` split at `1 + t = 10^j`, returning the
/// total, the value on `[0, 10^3]`, and the last two decade increments.
fn decade_quadrature<F: Fn(f64) -> f64>(g: &F, horizon: f64) -> (f64, f64, f64, f64) {
    let mut edges = vec![0.0];
    let mut e = 10.0;
    while e - 1.0 < horizon {
        edges.push(e - 1.0);
        e *= 10.0;
    }
    let mut pieces: Vec<f64> = edges.windows(2).map(|w| adaptive_simpson(g, w[0], w[1], QUADRATURE_REL_TOL)).collect();
    let last_edge = *edges.last().unwrap();
    let remainder = adaptive_simpson(g, last_edge, horizon, QUADRATURE_REL_TOL);
    let total: f64 = pieces.iter().sum::<f64>() + remainder;
    let upto_1e3: f64 = edges
        .windows(2)
        .zip(pieces.iter())
        .filter(|(w, _)| w[1] <= 1e3)
        .map(|(_, v)| v)
        .sum::<f64>()
        + adaptive_simpson(g, 999.0, 1000.0, QUADRATURE_REL_TOL);
    let last = pieces.pop().unwrap_or(0.0);
    let prev = pieces.pop().unwrap_or(0.0);
    (total, upto_1e3, last, prev)
}

fn numeric_check<F: Fn(f64) -> f64>(name: &str, exponent: f64, g: F) -> NumericCheck {
    let (value, upto_1e3, last, prev) = decade_quadrature(&g, QUADRATURE_HORIZON);
    let decade_ratio = last / prev;
    let analytic_convergent = exponent > 1.0;
    let numeric_convergent = decade_ratio < DIVERGENT_DECADE_RATIO;
    NumericCheck {
        name: name.to_string(),
        exponent,
        value,
        growth_ratio: value / upto_1e3,
        decade_ratio,
        analytic_convergent,
        numeric_convergent,
        agrees: analytic_convergent == numeric_convergent,
    }
}

/// Analytic classification of (H1), (H3), `limsup lambda beta < 2 mu` and the
/// distance-squared reduction of (H_fitz), `int lambda/beta < inf`, with
/// quadrature cross-checks on `[0, 10^6]`.
pub fn classify(s: &Schedule, mu: f64) -> Result<HypothesisReport> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be > 0, got {mu}")));
    }
    let (p, q) = (s.p, s.q);
    let limsup = s.product_limsup();
    let product_ok = limsup < 2.0 * mu;
    let hfitz = p + q > 1.0;

    let numeric_cross_checks = vec![
        numeric_check("int_lambda_sq", 2.0 * p, |t| s.lambda(t).powi(2)),
        numeric_check("int_lambda", p, |t| s.lambda(t)),
        numeric_check("int_lambda_over_beta", p + q, |t| s.lambda(t) / s.beta(t)),
    ];

    Ok(HypothesisReport {
        h1: Verdict { ok: true, criterion: "power laws are positive and continuous on [0, b]".into() },
        h3_l2: Verdict { ok: 2.0 * p > 1.0, criterion: format!("lambda in L2 iff p > 1/2 (p = {p})") },
        h3_not_l1: Verdict { ok: p <= 1.0, criterion: format!("lambda not in L1 iff p <= 1 (p = {p})") },
        product_limsup: limsup.is_finite().then_some(limsup),
        product_ok: Verdict {
            ok: product_ok,
            criterion: format!("limsup lambda*beta = {limsup} < 2 mu = {}", 2.0 * mu),
        },
        hfitz_distsq_ok: if hfitz { HfitzStatus::Holds } else { HfitzStatus::Fails },
        hfitz_criterion: format!("int lambda/beta < inf iff p + q > 1 (p + q = {})", p + q),
        numeric_cross_checks,
    })
}

/// Smallest `t0 >= 0` after which `lambda(t) beta(t)` stays below
/// `(limsup + 2 mu) / 2`.
pub fn lambda_beta_limsup_bound_time(s: &Schedule, mu: f64) -> Result<f64> {
    let limsup = s.product_limsup();
    if !(limsup < 2.0 * mu) {
        return Err(Error::PremiseViolated(format!("limsup lambda*beta = {limsup} is not below 2 mu = {}", 2.0 * mu)));
    }
    let threshold = 0.5 * (limsup + 2.0 * mu);
    let c = s.c_lambda * s.c_beta;
    if s.q == s.p || c <= threshold {
        return Ok(0.0);
    }
    // c (1+t)^(q-p) = threshold.
    Ok(((c / threshold).powf(1.0 / (s.p - s.q)) - 1.0).max(0.0))
}
