//! Inverse optimal spectral problem for the weighted q-Laplacian.
//!
//! Given a prior density `rho_bar` and a target eigenvalue `lambda`, find the
//! density `rho_hat` closest to `rho_bar` in `L^alpha` whose principal
//! eigenvalue of `-div(rho |grad phi|^(q-2) grad phi) = lambda b |phi|^(q-2) phi`
//! equals `lambda`. The minimizer yields the nonnegative weak solution of the
//! (p,q)-Laplace problem with `p = q alpha / (alpha - 1)`.
//!
//! Discretization: continuous P1 elements on interval partitions and on
//! triangulated rectangles, densities piecewise constant on cells.

pub mod assembly;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod inverse;
mod linalg;
pub mod oracles;
pub mod pq;

pub use assembly::{
    b_norm_q, energy_report, p_energy, pq_weak_residual, q_energy, q_energy_derivative, rayleigh_quotient,
    spectral_weak_residual, EnergyReport, WeakResidual,
};
pub use eigen::{
    eigen_residual, eigenvalue_derivative, principal_eigenpair, principal_eigenpair_from, EigSolverConfig, EigenPair,
};
pub use error::{Error, Result};
pub use grid::{Cell, CellField, CellGradients, Dim, Grid, NodalField, Shape};
pub use inverse::{
    kkt_report, scale_to_feasible, solve_inverse, solve_inverse_from, InverseConfig, InverseSolution, InverseStatus,
    IterationRecord, KktReport,
};
pub use oracles::{ProbeRecord, ProbeReport};
pub use pq::{construct_solution, existence_verdict, Existence, PqSolution, Verdict, PQ_RESIDUAL_TOL};
