use thiserror::Error;

use crate::eigen::EigenPair;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The b-weighted q-norm of a trial function is not positive.
    #[error("degenerate denominator: b-weighted q-norm is {0:e}")]
    DegenerateDenominator(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("inadmissible input: {0}")]
    Admissibility(String),

    /// Carries the last iterate of the eigensolver.
    #[error(
        "eigensolver did not converge after {} outer iterations (last increment {:e})",
        .0.iterations,
        .0.final_increment
    )]
    NotConverged(Box<EigenPair>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "no nonnegative weak solution exists: lambda = {lambda} does not exceed lambda1(prior) = {lambda1}"
    )]
    NoSolution { lambda: f64, lambda1: f64 },

    #[error("linear solve failed: {0}")]
    Linear(String),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("q must be a finite number >= 2, got {q}")))
    }
}
