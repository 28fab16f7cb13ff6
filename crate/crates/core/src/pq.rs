//! Nonnegative weak solution of the degenerate (p,q)-Laplace problem
//! `-div(rho_bar |grad u|^(q-2) grad u) - div(|grad u|^(p-2) grad u) = lambda b |u|^(q-2) u`
//! built from the inverse-optimal density: `u = mu^((alpha-1)/q) phi1(rho_hat)`.

use serde::Serialize;

use crate::assembly::{energy_report, pq_weak_residual, EnergyReport};
use crate::eigen::{principal_eigenpair, EigSolverConfig};
use crate::error::{check_q, Error, Result};
use crate::grid::{CellField, Grid, NodalField};
use crate::inverse::{tie_band, InverseSolution, InverseStatus};

/// Normalized residual below which a constructed solution is marked verified.
pub const PQ_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct PqSolution<'a> {
    pub u_hat: NodalField,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    /// Normalized max-norm of the weak residual over all interior hat functions.
    pub residual_max: f64,
    pub energy_report: EnergyReport,
    pub verified: bool,
    #[serde(skip)]
    pub source: &'a InverseSolution,
}

impl PqSolution<'_> {
    /// `(int rho_bar |grad u|^q + int |grad u|^p) / int b |u|^q`, which equals
    /// `lambda` for any weak solution.
    pub fn rayleigh_identity(&self) -> f64 {
        let e = &self.energy_report;
        (e.dirichlet_energy + e.p_energy) / e.b_norm_q
    }
}

pub fn construct_solution<'a>(
    grid: &Grid,
    sol: &'a InverseSolution,
    rho_bar: &CellField,
    b: &NodalField,
    q: f64,
    alpha: f64,
) -> Result<PqSolution<'a>> {
    check_q(q)?;
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(Error::Parameter(format!("alpha must exceed 1, got {alpha}")));
    }
    match sol.status {
        InverseStatus::Solved => {}
        InverseStatus::PriorAlreadyFeasible => {
            return Err(Error::NoSolution { lambda: sol.lambda_target, lambda1: sol.lambda1_prior });
        }
        InverseStatus::NotConverged => {
            return Err(Error::Precondition("inverse solve did not converge".into()));
        }
    }
    let p = q * alpha / (alpha - 1.0);
    let scale = sol.mu.powf((alpha - 1.0) / q);
    let u_hat = sol.eigenpair_at_rho_hat.phi1.scaled(scale);
    let residual = pq_weak_residual(grid, rho_bar, b, sol.lambda_target, &u_hat, q, p)?;
    let energy_report = energy_report(grid, rho_bar, b, &u_hat, q, p)?;
    Ok(PqSolution {
        u_hat,
        lambda: sol.lambda_target,
        p,
        q,
        residual_max: residual.max_norm,
        energy_report,
        verified: residual.max_norm < PQ_RESIDUAL_TOL,
        source: sol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Existence {
    /// `lambda <= lambda1(rho_bar)` (up to the tie band).
    NoSolution,
    /// `lambda > lambda1(rho_bar)`.
    UniqueSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub existence: Existence,
    pub lambda1: f64,
    /// Relative band around `lambda1` treated as equality.
    pub band: f64,
}

/// Decides solvability of the (p,q) problem by comparing `lambda` with the
/// computed principal eigenvalue of the prior. Values within the relative
/// tie band of `lambda1(rho_bar)` count as equal and get `NoSolution`.
pub fn existence_verdict(
    grid: &Grid,
    rho_bar: &CellField,
    b: &NodalField,
    q: f64,
    lambda: f64,
    eig_cfg: &EigSolverConfig,
) -> Result<Verdict> {
    let pair = principal_eigenpair(grid, rho_bar, b, q, eig_cfg)?;
    let band = tie_band(eig_cfg);
    let existence = if lambda <= pair.lambda1 * (1.0 + band) { Existence::NoSolution } else { Existence::UniqueSolution };
    Ok(Verdict { existence, lambda1: pair.lambda1, band })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::assembly::spectral_weak_residual;
    use crate::inverse::{solve_inverse, InverseConfig};

    fn setup(n: usize) -> (Grid, CellField, NodalField) {
        let g = Grid::interval(0.0, 1.0, n).unwrap();
        (g.clone(), CellField::constant(&g, 1.0), NodalField::constant(&g, 1.0))
    }

    #[test]
    fn verdicts() {
        let (g, rho, b) = setup(64);
        let cfg = EigSolverConfig::default();
        let v = existence_verdict(&g, &rho, &b, 2.0, PI * PI / 2.0, &cfg).unwrap();
        assert_eq!(v.existence, Existence::NoSolution);
        let v = existence_verdict(&g, &rho, &b, 2.0, 2.0 * PI * PI, &cfg).unwrap();
        assert_eq!(v.existence, Existence::UniqueSolution);
        let v2 = existence_verdict(&g, &rho, &b, 2.0, v.lambda1, &cfg).unwrap();
        assert_eq!(v2.existence, Existence::NoSolution);
    }

    #[test]
    fn unit_multiplier_keeps_eigenfunction() {
        let (g, rho, b) = setup(32);
        let eig_cfg = EigSolverConfig::default();
        let mut sol = solve_inverse(&g, &rho, &b, 2.0 * PI * PI, 2.0, &InverseConfig::default(), &eig_cfg).unwrap();
        sol.mu = 1.0;
        let pq = construct_solution(&g, &sol, &rho, &b, 2.0, 2.0).unwrap();
        assert_eq!(pq.u_hat, sol.eigenpair_at_rho_hat.phi1);
        assert_eq!(pq.p, 4.0);
    }

    #[test]
    fn constructed_solution_is_certified() {
        let (g, rho, b) = setup(64);
        let eig_cfg = EigSolverConfig::default();
        for (q, alpha, lam) in [(2.0, 2.0, 2.0 * PI * PI), (3.0, 3.0, 45.0)] {
            let cfg = InverseConfig { alpha, ..Default::default() };
            let sol = solve_inverse(&g, &rho, &b, lam, q, &cfg, &eig_cfg).unwrap();
            let pq = construct_solution(&g, &sol, &rho, &b, q, alpha).unwrap();
            assert!(pq.verified, "residual {}", pq.residual_max);
            assert!(pq.u_hat.iter().all(|&v| v >= 0.0));
            assert!((pq.rayleigh_identity() - lam).abs() < 1e-8 * lam);
            // the same field solves the spectral problem at rho_hat
            let spec = spectral_weak_residual(&g, &sol.rho_hat, &b, lam, &pq.u_hat, q).unwrap();
            assert!(spec.max_norm < 1e-8, "{}", spec.max_norm);
            // doubling breaks the equation since p != q
            let doubled = pq.u_hat.scaled(2.0);
            let r = pq_weak_residual(&g, &rho, &b, lam, &doubled, q, pq.p).unwrap();
            assert!(r.max_norm > 1e-4);
            let r = pq_weak_residual(&g, &rho, &b, lam / 2.0, &pq.u_hat, q, pq.p).unwrap();
            assert!(r.max_norm > 1e-4);
        }
    }

    #[test]
    fn prior_feasible_has_no_solution() {
        let (g, rho, b) = setup(32);
        let sol = solve_inverse(&g, &rho, &b, 1.0, 2.0, &InverseConfig::default(), &EigSolverConfig::default()).unwrap();
        assert!(matches!(construct_solution(&g, &sol, &rho, &b, 2.0, 2.0), Err(Error::NoSolution { .. })));
    }
}
