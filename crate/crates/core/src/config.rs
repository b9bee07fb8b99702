//! Declarative run configuration, serialized as JSON.
//!
//! ```json
//! {
//!   "problem": {"builtin": "P1_strongly_monotone"},
//!   "schedule": {"lambda": {"c": 1.0, "p": 1.0}, "beta": {"c": 1.0, "q": 1.0}},
//!   "integrator": {"method": "rk4", "t_end": 10000.0},
//!   "x0": [1.0, 1.0, 1.0, 1.0],
//!   "outputs": {"trajectory_csv": "traj.csv", "report_json": "report.json"},
//!   "discrete": {"n": 1000, "use_h1": true}
//! }
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegrateOptions, Method, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, Point};
use crate::operators::{Cocoercive, ConvexSet, MaxMonotone, Penalty};
use crate::problems::{builtin, named_from_instance, random_instance, NamedInstance};
use crate::schedules::Schedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub x0: StartSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Builtin(String),
    Random {
        seed: u64,
        dim: usize,
        #[serde(default)]
        gamma: f64,
    },
    Inline(InlineProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub a: MonotoneSpec,
    pub d: CocoerciveSpec,
    pub b: PenaltySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Affine { anchor: Vec<f64>, basis: Vec<Vec<f64>> },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Singleton { point: Vec<f64> },
    Whole { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonotoneSpec {
    Zero {
        dim: usize,
    },
    Linear {
        m: Vec<Vec<f64>>,
        #[serde(default)]
        gamma: f64,
    },
    Affine {
        m: Vec<Vec<f64>>,
        q: Vec<f64>,
        #[serde(default)]
        gamma: f64,
    },
    NormalCone {
        set: SetSpec,
    },
    L1 {
        dim: usize,
        weight: f64,
    },
    LinearPlusNormalCone {
        m: Vec<Vec<f64>>,
        set: SetSpec,
        #[serde(default)]
        gamma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CocoerciveSpec {
    Zero { dim: usize, eta: f64 },
    GradientQuadratic { q: Vec<Vec<f64>>, c: Vec<f64>, eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltySpec {
    DistSq { set: SetSpec, mu: f64 },
    LinearPsd { m: Vec<Vec<f64>>, mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    pub c: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub c: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub lambda: LambdaSpec,
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: Method,
    pub t_end: f64,
    pub h_max: f64,
    pub safety: f64,
    /// 0 picks the decimation automatically.
    pub record_every: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let d = IntegrateOptions::default();
        Self { method: d.method, t_end: 100.0, h_max: d.h_max, safety: d.safety, record_every: d.record_every }
    }
}

/// `"zeros"` or an explicit point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Named(String),
    Point(Vec<f64>),
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::Named("zeros".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    pub n: usize,
    /// `h_n = 1`; otherwise `h_n` is the integrator's `h_max`.
    #[serde(default)]
    pub use_h1: bool,
}

impl RunConfig {
    /// Parses JSON, naming the offending field on error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidArgument(format!("config field `{path}`: {}", e.into_inner()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = &self.schedule;
        Schedule::new(s.lambda.c, s.lambda.p, s.beta.c, s.beta.q)
    }

    pub fn instance(&self) -> Result<NamedInstance> {
        match &self.problem {
            ProblemSpec::Builtin(id) => builtin(id),
            ProblemSpec::Random { seed, dim, gamma } => random_instance(*seed, *dim, *gamma),
            ProblemSpec::Inline(inline) => named_from_instance("inline", inline.build()?),
        }
    }

    pub fn start(&self, dim: usize) -> Result<Point> {
        match &self.x0 {
            StartSpec::Named(name) if name == "zeros" => Ok(Point::zeros(dim)),
            StartSpec::Named(name) => Err(Error::InvalidArgument(format!("config field `x0`: unknown start `{name}`"))),
            StartSpec::Point(v) if v.len() == dim => Ok(Point::from_column_slice(v)),
            StartSpec::Point(v) => Err(Error::DimensionMismatch { expected: dim, got: v.len() }),
        }
    }

    pub fn integrate_options(&self, reference: Option<Point>) -> IntegrateOptions {
        let i = &self.integrator;
        IntegrateOptions {
            method: i.method,
            h_max: i.h_max,
            safety: i.safety,
            record_every: i.record_every,
            reference,
            force_unit_step: false,
        }
    }
}

fn vector(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet> {
        match self {
            SetSpec::Box { lo, hi } => ConvexSet::boxed(vector(lo), vector(hi)),
            SetSpec::Ball { center, radius } => ConvexSet::ball(vector(center), *radius),
            SetSpec::Affine { anchor, basis } => ConvexSet::affine(vector(anchor), basis.iter().map(|b| vector(b)).collect()),
            SetSpec::Halfspace { normal, offset } => ConvexSet::halfspace(vector(normal), *offset),
            SetSpec::Singleton { point } => Ok(ConvexSet::singleton(vector(point))),
            SetSpec::Whole { dim } => Ok(ConvexSet::whole_space(*dim)),
        }
    }
}

impl InlineProblem {
    pub fn build(&self) -> Result<ProblemInstance> {
        let a = match &self.a {
            MonotoneSpec::Zero { dim } => MaxMonotone::zero(*dim),
            MonotoneSpec::Linear { m, gamma } => MaxMonotone::linear(matrix_from_rows(m)?, *gamma)?,
            MonotoneSpec::Affine { m, q, gamma } => MaxMonotone::affine(matrix_from_rows(m)?, vector(q), *gamma)?,
            MonotoneSpec::NormalCone { set } => MaxMonotone::normal_cone(set.build()?),
            MonotoneSpec::L1 { dim, weight } => MaxMonotone::subdifferential_l1(*dim, *weight)?,
            MonotoneSpec::LinearPlusNormalCone { m, set, gamma } => {
                MaxMonotone::linear_plus_normal_cone(matrix_from_rows(m)?, set.build()?, *gamma)?
            }
        };
        let d = match &self.d {
            CocoerciveSpec::Zero { dim, eta } => Cocoercive::zero(*dim, *eta)?,
            CocoerciveSpec::GradientQuadratic { q, c, eta } => {
                Cocoercive::gradient_quadratic(matrix_from_rows(q)?, vector(c), *eta)?
            }
        };
        let b = match &self.b {
            PenaltySpec::DistSq { set, mu } => Penalty::dist_sq_gradient(set.build()?, *mu)?,
            PenaltySpec::LinearPsd { m, mu } => Penalty::linear_psd(matrix_from_rows(m)?, *mu)?,
        };
        ProblemInstance::new(a, d, b)
    }
}
