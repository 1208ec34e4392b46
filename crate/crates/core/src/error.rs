use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("n must be even and at least 4 (got {0})")]
    BadResolution(usize),
    #[error("period must be positive and finite (got {0})")]
    BadPeriod(f64),
    #[error("dealias fraction must lie in (0, 1] (got {0})")]
    BadDealias(f64),
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "forcing band [{rho0}, {rho1}] holds no lattice shell below the dealias cutoff; \
         nearest shells: below {below:?}, above {above:?}"
    )]
    EmptyBand {
        rho0: f64,
        rho1: f64,
        below: Option<f64>,
        above: Option<f64>,
    },
    #[error("field has energy on shells below rho0 = {rho0}: |k|/period = {shells:?}")]
    SupportViolation { rho0: f64, shells: Vec<f64> },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("CFL violation: dt = {dt} exceeds the admissible step {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite value detected at step {step}")]
    NotFinite { step: usize },
    #[error(
        "advecting field violates the gradient bound: |grad u| = {grad} > |f|_X / nu = {bound}"
    )]
    GradientBound { grad: f64, bound: f64 },
    #[error("tail not integrable at this horizon (measured rate {rate})")]
    TailNotIntegrable { rate: f64 },
    #[error("trajectory has no stored fields to integrate")]
    NoSnapshots,
    #[error(
        "inner contraction violated: advection too strong for viscosity \
         (measured inner ratio {ratio:.3e})"
    )]
    InnerDivergence { ratio: f64 },
    #[error("inner iteration did not reach tolerance {tol:e} in {iterations} steps (residual {residual:e})")]
    InnerNotConverged {
        tol: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("energy budget exceeded: increase M or decrease |f|_X (|U^{iterate}| = {l2} > M = {budget})")]
    EnergyBudget {
        iterate: usize,
        l2: f64,
        budget: f64,
    },
    #[error(
        "outer iteration is not contracting (q = {ratio:.3e} >= 1 for 3 consecutive iterates); \
         the smallness condition |f|_X < nu^3/(C M) is violated for this configuration"
    )]
    NonContraction { ratio: f64 },
    #[error("outer iteration did not converge in {0} iterations")]
    OuterNotConverged(usize),
    #[error("series needs at least {needed} samples in the fit window (got {got})")]
    ShortSeries { needed: usize, got: usize },
    #[error("series value at t = {t} is not strictly positive ({value})")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("time derivative is under-resolved: relative stencil error {0:.3} exceeds 10%")]
    UnderResolved(f64),
    #[error("no stored sample at t = {0}")]
    MissingSample(f64),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = core::result::Result<T, Error>;
