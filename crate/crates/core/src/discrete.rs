//! The discrete forward-backward penalty scheme
//! `x_{n+1} = x_n + h_n (J_{lambda_n A}(x_n - lambda_n D x_n - lambda_n beta_n B x_n) - x_n)`.

use std::io::{self, Write};

use crate::dynamics::{fmt_f64, integrate, IntegrateOptions, Method, ProblemInstance, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, check_finite, Point};
use crate::schedules::Schedule;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRun {
    /// `x_0, ..., x_N`.
    pub iterates: Vec<Point>,
    pub lambda_seq: Vec<f64>,
    pub beta_seq: Vec<f64>,
    pub h_seq: Vec<f64>,
    /// `||x_{n+1} - x_n|| / h_n`.
    pub residuals: Vec<f64>,
}

impl DiscreteRun {
    pub fn steps(&self) -> usize {
        self.residuals.len()
    }

    pub fn last(&self) -> &Point {
        self.iterates.last().expect("a run holds at least x_0")
    }

    /// Writes `n,x_0..x_{d-1},residual,lambda_n,beta_n`; the final iterate has
    /// no step data and is written with empty trailing fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.iterates[0].len();
        let mut header = vec!["n".to_string()];
        header.extend((0..dim).map(|i| format!("x_{i}")));
        header.extend(["residual", "lambda_n", "beta_n"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for (n, x) in self.iterates.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            if n < self.steps() {
                row.push(fmt_f64(self.residuals[n]));
                row.push(fmt_f64(self.lambda_seq[n]));
                row.push(fmt_f64(self.beta_seq[n]));
            } else {
                row.extend(["", "", ""].map(String::from));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Runs `n_steps` steps of the scheme from `x0`.
pub fn iterate(
    pr: &ProblemInstance,
    lambda_seq: &[f64],
    beta_seq: &[f64],
    h_seq: &[f64],
    x0: &Point,
    n_steps: usize,
) -> Result<DiscreteRun> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    for (name, seq) in [("lambda", lambda_seq), ("beta", beta_seq), ("h", h_seq)] {
        if seq.len() < n_steps {
            return Err(Error::InvalidArgument(format!("{name} sequence has {} < {n_steps} entries", seq.len())));
        }
        if let Some(v) = seq[..n_steps].iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("{name} sequence entry {v} is not positive")));
        }
    }
    check_dim(pr.dim(), x0)?;
    check_finite(x0, "initial iterate")?;

    let mut iterates = Vec::with_capacity(n_steps + 1);
    let mut residuals = Vec::with_capacity(n_steps);
    iterates.push(x0.clone());
    for n in 0..n_steps {
        let x = &iterates[n];
        let h = h_seq[n];
        let f = pr.forward_backward(lambda_seq[n], beta_seq[n], x)? - x;
        let next = x + &f * h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("iterate"));
        }
        residuals.push((&next - x).norm() / h);
        iterates.push(next);
    }
    Ok(DiscreteRun {
        iterates,
        lambda_seq: lambda_seq[..n_steps].to_vec(),
        beta_seq: beta_seq[..n_steps].to_vec(),
        h_seq: h_seq[..n_steps].to_vec(),
        residuals,
    })
}

/// `lambda_n = lambda(n)`, `beta_n = beta(n)` for `n = 0..n_steps`.
pub fn sample_schedule(s: &Schedule, n_steps: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n_steps).map(|n| (s.lambda(n as f64), s.beta(n as f64))).unzip()
}

/// Side-by-side run of forced unit-step Euler and the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteComparison {
    pub steps: usize,
    /// Largest per-coordinate difference over all steps.
    pub max_discrepancy: f64,
    /// Pass threshold `1e-15 * steps`.
    pub tolerance: f64,
    pub run: DiscreteRun,
    pub euler: Trajectory,
}

impl DiscreteComparison {
    pub fn passed(&self) -> bool {
        self.max_discrepancy <= self.tolerance
    }
}

/// Runs explicit Euler with `h = 1` and the scheme with `lambda_n = lambda(n + lambda_shift)`,
/// `beta_n = beta(n + lambda_shift)`. A nonzero shift is a deliberate sampling
/// error used to show the comparison detects it.
pub fn compare_with_euler(
    pr: &ProblemInstance,
    s: &Schedule,
    x0: &Point,
    n_steps: usize,
    lambda_shift: usize,
) -> Result<DiscreteComparison> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let opts = IntegrateOptions {
        method: Method::Euler,
        h_max: 1.0,
        safety: 1.0,
        record_every: 1,
        reference: None,
        force_unit_step: true,
    };
    let euler = integrate(pr, s, x0, n_steps as f64, &opts)?;
    let (lambda_seq, beta_seq) = sample_schedule(s, n_steps + lambda_shift);
    let run = iterate(
        pr,
        &lambda_seq[lambda_shift..],
        &beta_seq[lambda_shift..],
        &vec![1.0; n_steps],
        x0,
        n_steps,
    )?;
    let max_discrepancy = euler
        .states
        .iter()
        .zip(&run.iterates)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    Ok(DiscreteComparison { steps: n_steps, max_discrepancy, tolerance: 1e-15 * n_steps as f64, run, euler })
}
