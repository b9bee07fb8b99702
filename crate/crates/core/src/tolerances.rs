/// Numerical tolerances shared by every module.
///
/// Lyapunov verification compares quantities produced by several modules, so
/// all thresholds live in this one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Resolvent identity `J_A(z + v) = z` and other graph-membership checks.
    pub graph: f64,
    /// Pairwise orthonormality of affine-subspace bases.
    pub orthonormal: f64,
    /// Positive semidefiniteness of symmetric parts.
    pub psd: f64,
    /// Stopping residual of iterative resolvents.
    pub inner_residual: f64,
    /// Iteration cap of iterative resolvents.
    pub inner_max_iter: usize,
    /// Cocoercivity margin below which a sampled pair counts as a failure.
    pub cocoercive_margin: f64,
    /// Relative slack of the Lyapunov inequality checks.
    pub lyapunov_rel: f64,
}

impl Tolerances {
    pub const DEFAULT: Self = Self {
        graph: 1e-10,
        orthonormal: 1e-12,
        psd: 1e-10,
        inner_residual: 1e-12,
        inner_max_iter: 100_000,
        cocoercive_margin: 1e-10,
        lyapunov_rel: 1e-8,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
