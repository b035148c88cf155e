use alloc::vec::Vec;

/// Errors raised by model construction, solvers and the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid dimensions: need n > m >= 1 (n = {n}, m = {m})")]
    InvalidDimensions { n: usize, m: usize },
    #[error("input matrix not full rank")]
    NotFullRank,
    #[error("input matrix has {found} identically zero rows, expected {expected}")]
    ZeroRowCount { found: usize, expected: usize },
    #[error("singular matrix: {0}")]
    Singular(&'static str),
    #[error("x* not assignable: residual norm {residual:e}")]
    NotAssignable { residual: f64 },
    #[error("gains must be strictly positive")]
    NonPositiveGain,
    #[error("weights must be strictly positive")]
    NonPositiveWeight,
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("{0} is not Hurwitz")]
    NotHurwitz(&'static str),
    #[error("derivative of term {index} disagrees with finite differences at x = {at}")]
    InconsistentDerivative { index: usize, at: f64 },
    #[error("{solver} did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence {
        solver: &'static str,
        residual: f64,
        iterations: usize,
        last_iterate: Vec<f64>,
    },
    #[error("nonphysical equilibrium: negative temperature")]
    NonphysicalEquilibrium,
    #[error("no diagonal certificate found")]
    NoDiagonalCertificate,
    #[error("field blow-up at t = {time}")]
    BlowUp { time: f64, last_state: Vec<f64> },
    #[error("sampler is empty")]
    EmptySampler,
    #[error("invalid sampling box")]
    InvalidBox,
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("interconnection matrix is not skew-symmetric")]
    NotSkewSymmetric,
    #[error("damping matrix is not symmetric positive semidefinite")]
    InvalidDamping,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
