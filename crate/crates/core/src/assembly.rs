//! Discrete energies, Rayleigh quotients and weak-form residuals.
//!
//! Gradient-energy integrals use exact cell quadrature (gradients are
//! cell-constant); b-weighted and norm integrals use the lumped node weights.
//! Sums run in fixed cell/node order so results are bit-reproducible.

use serde::Serialize;

use crate::error::{check_len, check_q, Error, Result};
use crate::grid::{CellField, Grid, NodalField};

/// Energies of a single trial function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `sum_c rho_c |grad u|^q |c|`
    pub dirichlet_energy: f64,
    /// `sum_c |grad u|^p |c|`
    pub p_energy: f64,
    /// `sum_i w_i b_i |u_i|^q`
    pub b_norm_q: f64,
    /// `dirichlet_energy / b_norm_q`, present only when `b_norm_q > 0`.
    pub rayleigh: Option<f64>,
}

/// Nodal residual of a weak form tested against every interior hat function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidual {
    /// Raw residual per node (zero on the boundary).
    pub residual: NodalField,
    /// Max-norm of the raw residual divided by `scale`.
    pub max_norm: f64,
    /// Normalization constant (total gradient energy of the tested field).
    pub scale: f64,
}

pub fn q_energy(grid: &Grid, rho: &CellField, u: &NodalField, q: f64) -> Result<f64> {
    check_q(q)?;
    check_len(grid.cell_count(), rho.len())?;
    check_len(grid.node_count(), u.len())?;
    Ok(grid
        .cells()
        .iter()
        .zip(rho.iter())
        .map(|(c, r)| {
            let g = c.gradient(u);
            r * g[0].hypot(g[1]).powf(q) * c.measure()
        })
        .sum())
}

/// Unweighted `sum_c |grad u|^p |c|`.
pub fn p_energy(grid: &Grid, u: &NodalField, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Parameter(format!("p must be >= 1, got {p}")));
    }
    check_len(grid.node_count(), u.len())?;
    Ok(grid
        .cells()
        .iter()
        .map(|c| {
            let g = c.gradient(u);
            g[0].hypot(g[1]).powf(p) * c.measure()
        })
        .sum())
}

/// Lumped `sum_i w_i b_i |u_i|^q`.
pub fn b_norm_q(grid: &Grid, b: &NodalField, u: &NodalField, q: f64) -> Result<f64> {
    grid.integrate_nodal(&[b, u], |v| v[0] * v[1].abs().powf(q))
}

pub fn rayleigh_quotient(grid: &Grid, rho: &CellField, b: &NodalField, u: &NodalField, q: f64) -> Result<f64> {
    let den = b_norm_q(grid, b, u, q)?;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(q_energy(grid, rho, u, q)? / den)
}

pub fn energy_report(grid: &Grid, rho: &CellField, b: &NodalField, u: &NodalField, q: f64, p: f64) -> Result<EnergyReport> {
    let dirichlet_energy = q_energy(grid, rho, u, q)?;
    let b_norm_q = b_norm_q(grid, b, u, q)?;
    Ok(EnergyReport {
        dirichlet_energy,
        p_energy: p_energy(grid, u, p)?,
        b_norm_q,
        rayleigh: (b_norm_q > 0.0).then(|| dirichlet_energy / b_norm_q),
    })
}

/// Directional derivative of `q_energy` at `u` along `h`:
/// `q sum_c rho_c |grad u|^(q-2) (grad u, grad h) |c|`.
pub fn q_energy_derivative(grid: &Grid, rho: &CellField, u: &NodalField, h: &NodalField, q: f64) -> Result<f64> {
    check_q(q)?;
    check_len(grid.cell_count(), rho.len())?;
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), h.len())?;
    Ok(q * grid
        .cells()
        .iter()
        .zip(rho.iter())
        .map(|(c, r)| {
            let g = c.gradient(u);
            let dh = c.gradient(h);
            r * flux_weight(g, q) * (g[0] * dh[0] + g[1] * dh[1]) * c.measure()
        })
        .sum::<f64>())
}

/// `|g|^(q-2)`, which is exactly 0 at `g = 0` for `q > 2` and 1 for `q = 2`.
#[inline]
pub(crate) fn flux_weight(g: [f64; 2], q: f64) -> f64 {
    g[0].hypot(g[1]).powf(q - 2.0)
}

/// Residual of the weak (p,q) equation
/// `int rho |grad u|^(q-2) grad u . grad h + |grad u|^(p-2) grad u . grad h - lambda b |u|^(q-2) u h = 0`
/// tested against every interior hat function `h`, normalized by
/// `int rho |grad u|^q + int |grad u|^p`.
pub fn pq_weak_residual(
    grid: &Grid,
    rho_bar: &CellField,
    b: &NodalField,
    lambda: f64,
    u: &NodalField,
    q: f64,
    p: f64,
) -> Result<WeakResidual> {
    if !(p.is_finite() && p > q) {
        return Err(Error::Parameter(format!("p must exceed q, got p = {p}, q = {q}")));
    }
    weak_residual(grid, rho_bar, Some(p), b, lambda, u, q)
}

/// Residual of the weighted q-Laplace eigen equation
/// `-div(rho |grad u|^(q-2) grad u) = lambda b |u|^(q-2) u`, normalized by
/// `int rho |grad u|^q`.
pub fn spectral_weak_residual(
    grid: &Grid,
    rho: &CellField,
    b: &NodalField,
    lambda: f64,
    u: &NodalField,
    q: f64,
) -> Result<WeakResidual> {
    weak_residual(grid, rho, None, b, lambda, u, q)
}

fn weak_residual(
    grid: &Grid,
    rho: &CellField,
    p: Option<f64>,
    b: &NodalField,
    lambda: f64,
    u: &NodalField,
    q: f64,
) -> Result<WeakResidual> {
    check_q(q)?;
    check_len(grid.cell_count(), rho.len())?;
    check_len(grid.node_count(), b.len())?;
    check_len(grid.node_count(), u.len())?;
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("weak solutions are nonzero; got u = 0".into()));
    }
    let mut r = vec![0.0; grid.node_count()];
    let mut scale = 0.0;
    for (c, rc) in grid.cells().iter().zip(rho.iter()) {
        let g = c.gradient(u);
        let mag = g[0].hypot(g[1]);
        let mut coef = rc * mag.powf(q - 2.0);
        scale += rc * mag.powf(q) * c.measure();
        if let Some(p) = p {
            coef += mag.powf(p - 2.0);
            scale += mag.powf(p) * c.measure();
        }
        for (k, &n) in c.nodes().iter().enumerate() {
            let dh = c.basis_gradients()[k];
            r[n] += coef * (g[0] * dh[0] + g[1] * dh[1]) * c.measure();
        }
    }
    for (n, (w, (bn, un))) in grid.node_weights().iter().zip(b.iter().zip(u.iter())).enumerate() {
        r[n] -= lambda * w * bn * un.abs().powf(q - 2.0) * un;
    }
    for (n, v) in r.iter_mut().enumerate() {
        if grid.is_boundary(n) {
            *v = 0.0;
        }
    }
    if !(scale > 0.0) {
        return Err(Error::DegenerateInput("tested field has zero gradient energy".into()));
    }
    let max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = NodalField::dirichlet(grid, r)?;
    Ok(WeakResidual { residual, max_norm: max / scale, scale })
}
