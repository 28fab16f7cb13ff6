//! Principal eigenpair of `-div(rho |grad phi|^(q-2) grad phi) = lambda b |phi|^(q-2) phi`
//! with homogeneous Dirichlet data, and the derivative of the principal
//! eigenvalue with respect to the density.
//!
//! The eigenpair is computed by nonlinear inverse iteration: each outer step
//! minimizes the strictly convex energy
//! `(1/q) int rho |grad u|^q - int b |phi_k|^(q-2) phi_k u`
//! (a single SPD solve for q = 2, damped Newton otherwise), clips the result
//! to its positive part and renormalizes it in the discrete q-norm. The
//! Rayleigh quotient is non-increasing along the iteration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{b_norm_q, flux_weight, rayleigh_quotient, spectral_weak_residual};
use crate::error::{check_len, check_q, Error, Result};
use crate::grid::{CellField, Grid, NodalField, Shape};
use crate::linalg::{BandedSpd, CholeskyBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigSolverConfig {
    /// Relative change of the eigenvalue between outer steps.
    pub tol_lambda: f64,
    /// Max-norm change of the normalized eigenfunction between outer steps.
    pub tol_increment: f64,
    pub max_outer: usize,
    /// Relative gradient tolerance of the inner convex solve.
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Newton weights use `|grad u|^2 + (eps_reg * mean|grad u|)^2`.
    pub eps_reg: f64,
}

impl Default for EigSolverConfig {
    fn default() -> Self {
        Self {
            tol_lambda: 1e-12,
            tol_increment: 1e-10,
            max_outer: 5000,
            inner_tol: 1e-12,
            inner_max: 200,
            eps_reg: 1e-10,
        }
    }
}

impl EigSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_lambda, self.tol_increment, self.inner_tol, self.eps_reg];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Parameter("eigensolver tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.inner_max == 0 {
            return Err(Error::Parameter("eigensolver iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Nonnegative, Dirichlet, lumped `int |phi|^q = 1`.
    pub phi1: NodalField,
    pub iterations: usize,
    pub final_increment: f64,
    /// Total Newton steps over all inner solves (equals `iterations` for q = 2).
    pub inner_iterations: usize,
}

pub fn principal_eigenpair(grid: &Grid, rho: &CellField, b: &NodalField, q: f64, cfg: &EigSolverConfig) -> Result<EigenPair> {
    principal_eigenpair_from(grid, rho, b, q, cfg, None)
}

/// Same as [`principal_eigenpair`] but starting from `guess` when given.
/// The guess must be nonnegative with positive b-weighted norm.
pub fn principal_eigenpair_from(
    grid: &Grid,
    rho: &CellField,
    b: &NodalField,
    q: f64,
    cfg: &EigSolverConfig,
    guess: Option<&NodalField>,
) -> Result<EigenPair> {
    check_q(q)?;
    cfg.validate()?;
    rho.check_density(grid)?;
    check_len(grid.node_count(), b.len())?;
    if !grid.interior_nodes().iter().any(|&n| b[n] > 0.0) {
        return Err(Error::Admissibility("b must be positive on a set of positive measure".into()));
    }

    let mut phi = match guess {
        Some(g) => {
            check_len(grid.node_count(), g.len())?;
            normalize_positive(grid, &NodalField::from_dofs(grid, &g.to_dofs(grid)), q)?
        }
        None => normalize_positive(grid, &sine_guess(grid), q)?,
    };
    if !(b_norm_q(grid, b, &phi, q)? > 0.0) {
        // initial guess outside the admissible cone; fall back to a
        // profile concentrated where b > 0
        let bump = NodalField::dirichlet_from_fn(grid, |_| 0.0);
        let mut vals = bump.into_values();
        for &n in grid.interior_nodes() {
            vals[n] = b[n].max(0.0);
        }
        phi = normalize_positive(grid, &NodalField::dirichlet(grid, vals)?, q)?;
    }
    let mut lambda = rayleigh_quotient(grid, rho, b, &phi, q)?;
    let mut inner = InnerSolver::new(grid, rho, q, cfg)?;
    let mut inner_total = 0;
    let mut increment = f64::INFINITY;

    for it in 1..=cfg.max_outer {
        let rhs: Vec<f64> = grid
            .interior_nodes()
            .iter()
            .map(|&n| grid.node_weights()[n] * b[n] * phi[n].abs().powf(q - 2.0) * phi[n])
            .collect();
        // at the fixed point u = lambda^(-1/(q-1)) phi
        let start: Vec<f64> = phi.to_dofs(grid).iter().map(|v| v * lambda.powf(-1.0 / (q - 1.0))).collect();
        let (u, steps) = inner.solve(&rhs, start)?;
        inner_total += steps;
        let next = normalize_positive(grid, &NodalField::from_dofs(grid, &u), q)?;
        let den = b_norm_q(grid, b, &next, q)?;
        if !(den > 0.0) {
            return Err(Error::Admissibility("iterate left the cone where int b |phi|^q > 0".into()));
        }
        let next_lambda = rayleigh_quotient(grid, rho, b, &next, q)?;
        increment = next.iter().zip(phi.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let change = (next_lambda - lambda).abs() / lambda.abs();
        phi = next;
        lambda = next_lambda;
        if change < cfg.tol_lambda && increment < cfg.tol_increment {
            return Ok(EigenPair { lambda1: lambda, phi1: phi, iterations: it, final_increment: increment, inner_iterations: inner_total });
        }
    }
    Err(Error::NotConverged(Box::new(EigenPair {
        lambda1: lambda,
        phi1: phi,
        iterations: cfg.max_outer,
        final_increment: increment,
        inner_iterations: inner_total,
    })))
}

/// `d/de lambda1(rho + e h) = int |grad phi1|^q h / int b |phi1|^q`.
pub fn eigenvalue_derivative(grid: &Grid, pair: &EigenPair, b: &NodalField, q: f64, h: &CellField) -> Result<f64> {
    check_q(q)?;
    check_len(grid.cell_count(), h.len())?;
    let den = b_norm_q(grid, b, &pair.phi1, q)?;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator(den));
    }
    let num: f64 = grid
        .cells()
        .iter()
        .zip(h.iter())
        .map(|(c, hc)| {
            let g = c.gradient(&pair.phi1);
            g[0].hypot(g[1]).powf(q) * hc * c.measure()
        })
        .sum();
    Ok(num / den)
}

/// Normalized max-norm of the weak eigen residual of `pair` at density `rho`.
pub fn eigen_residual(grid: &Grid, rho: &CellField, b: &NodalField, pair: &EigenPair, q: f64) -> Result<f64> {
    Ok(spectral_weak_residual(grid, rho, b, pair.lambda1, &pair.phi1, q)?.max_norm)
}

/// First Dirichlet eigenfunction of the constant-coefficient Laplacian on the
/// grid's bounding box.
pub fn sine_guess(grid: &Grid) -> NodalField {
    let [[x0, y0], [x1, y1]] = grid.bounds();
    match grid.shape() {
        Shape::Interval { .. } => NodalField::dirichlet_from_fn(grid, |p| (PI * (p[0] - x0) / (x1 - x0)).sin()),
        Shape::Rectangle { .. } => NodalField::dirichlet_from_fn(grid, |p| {
            (PI * (p[0] - x0) / (x1 - x0)).sin() * (PI * (p[1] - y0) / (y1 - y0)).sin()
        }),
    }
}

/// `max(u, 0) / ||max(u, 0)||_q` with the lumped norm.
fn normalize_positive(grid: &Grid, u: &NodalField, q: f64) -> Result<NodalField> {
    let clipped = NodalField::from_dofs(grid, &u.to_dofs(grid).iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
    let norm = grid.nodal_norm(&clipped, q)?;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateInput("iterate has no positive part".into()));
    }
    Ok(clipped.scaled(1.0 / norm))
}

/// Minimizer of `(1/q) sum_c rho_c |grad u|^q |c| - f . u` over interior dofs.
pub(crate) struct InnerSolver<'a> {
    grid: &'a Grid,
    rho: &'a CellField,
    q: f64,
    cfg: EigSolverConfig,
    /// Stiffness factorization, cached for q = 2.
    linear: Option<CholeskyBand>,
}

impl<'a> InnerSolver<'a> {
    pub fn new(grid: &'a Grid, rho: &'a CellField, q: f64, cfg: &EigSolverConfig) -> Result<Self> {
        let linear = if q == 2.0 {
            let zero = vec![0.0; grid.interior_nodes().len()];
            Some(hessian(grid, rho, q, &zero, 0.0).factor()?)
        } else {
            None
        };
        Ok(Self { grid, rho, q, cfg: *cfg, linear })
    }

    /// Returns the minimizer and the number of Newton steps taken.
    pub fn solve(&mut self, f: &[f64], start: Vec<f64>) -> Result<(Vec<f64>, usize)> {
        if let Some(chol) = &self.linear {
            return Ok((chol.solve(f), 1));
        }
        let (grid, rho, q) = (self.grid, self.rho, self.q);
        let fscale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut u = start;
        let (mut energy, mut grad) = energy_and_gradient(grid, rho, q, &u, f);
        let mut steps = 0;
        for _ in 0..self.cfg.inner_max {
            let gnorm = max_abs(&grad);
            if gnorm <= self.cfg.inner_tol * fscale {
                break;
            }
            let mean_grad = mean_gradient(grid, &u);
            let eps = if mean_grad > 0.0 { self.cfg.eps_reg * mean_grad } else { 1.0 };
            let chol = hessian(grid, rho, q, &u, eps).factor()?;
            let dir: Vec<f64> = chol.solve(&grad).iter().map(|v| -v).collect();
            let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            steps += 1;
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-14 {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let (e_new, g_new) = energy_and_gradient(grid, rho, q, &trial, f);
                let armijo = e_new <= energy + 1e-4 * t * slope;
                // near the minimum energy differences drown in rounding;
                // accept a step that still shrinks the gradient
                let flat = e_new <= energy + 1e-13 * energy.abs() && max_abs(&g_new) < gnorm;
                if armijo || flat {
                    u = trial;
                    energy = e_new;
                    grad = g_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((u, steps))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn mean_gradient(grid: &Grid, dofs: &[f64]) -> f64 {
    let u = NodalField::from_dofs(grid, dofs);
    let total: f64 = grid.cells().iter().map(|c| {
        let g = c.gradient(&u);
        g[0].hypot(g[1])
    }).sum();
    total / grid.cell_count() as f64
}

fn energy_and_gradient(grid: &Grid, rho: &CellField, q: f64, dofs: &[f64], f: &[f64]) -> (f64, Vec<f64>) {
    let u = NodalField::from_dofs(grid, dofs);
    let mut grad: Vec<f64> = f.iter().map(|v| -v).collect();
    let mut energy: f64 = -dofs.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
    for (c, rc) in grid.cells().iter().zip(rho.iter()) {
        let g = c.gradient(&u);
        let w = rc * flux_weight(g, q) * c.measure();
        energy += w * (g[0] * g[0] + g[1] * g[1]) / q;
        for (k, &n) in c.nodes().iter().enumerate() {
            if let Some(d) = grid.dof(n) {
                let dh = c.basis_gradients()[k];
                grad[d] += w * (g[0] * dh[0] + g[1] * dh[1]);
            }
        }
    }
    (energy, grad)
}

/// Hessian of the q-energy with regularized weights
/// `rho [ s I + (q-2) s' g g^T ]`, `s = (|g|^2 + eps^2)^((q-2)/2)`.
fn hessian(grid: &Grid, rho: &CellField, q: f64, dofs: &[f64], eps: f64) -> BandedSpd {
    let u = NodalField::from_dofs(grid, dofs);
    let mut h = BandedSpd::zeros(grid.interior_nodes().len(), grid.bandwidth());
    for (c, rc) in grid.cells().iter().zip(rho.iter()) {
        let g = c.gradient(&u);
        let r2 = g[0] * g[0] + g[1] * g[1] + eps * eps;
        let s = if q == 2.0 { 1.0 } else { r2.powf(0.5 * (q - 2.0)) };
        let t = if q == 2.0 { 0.0 } else { (q - 2.0) * r2.powf(0.5 * (q - 4.0)) };
        let scale = rc * c.measure();
        let grads = c.basis_gradients();
        for (a, &na) in c.nodes().iter().enumerate() {
            let Some(da) = grid.dof(na) else { continue };
            let ga = grads[a];
            let pa = g[0] * ga[0] + g[1] * ga[1];
            for (bi, &nb) in c.nodes().iter().enumerate() {
                let Some(db) = grid.dof(nb) else { continue };
                if db > da {
                    continue;
                }
                let gb = grads[bi];
                let pb = g[0] * gb[0] + g[1] * gb[1];
                h.add(da, db, scale * (s * (ga[0] * gb[0] + ga[1] * gb[1]) + t * pa * pb));
            }
        }
    }
    h
}
