//! Inverse optimal spectral problem: the density closest to a prior in the
//! discrete `L^alpha` norm whose principal eigenvalue equals a target.
//!
//! The minimizer satisfies `rho = rho_bar + mu |grad phi1(rho)|^(q/(alpha-1))`.
//! The primary solver iterates that identity: freeze the eigenfunction
//! gradient of the current iterate, pick `mu` so the new density hits the
//! target eigenvalue (the map `mu -> lambda1` is increasing and concave), and
//! repeat until the density stops moving. Every iterate is feasible.

use serde::{Deserialize, Serialize};

use crate::eigen::{eigenvalue_derivative, principal_eigenpair, principal_eigenpair_from, EigSolverConfig, EigenPair};
use crate::assembly::rayleigh_quotient;
use crate::error::{check_len, check_q, Error, Result};
use crate::grid::{CellField, Grid, NodalField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    pub alpha: f64,
    /// Relative tolerance on `|lambda1(rho) - lambda| / lambda`.
    pub tol_constraint: f64,
    /// Relative `L^alpha` change of the density between fixed-point steps.
    pub tol_fixed_point: f64,
    pub max_outer: usize,
    /// Initial `[lo, hi]` bracket for the multiplier; `hi` is doubled as needed.
    pub mu_bracket: (f64, f64),
    /// Switch to projected supergradient descent when the fixed point stalls.
    pub fallback: bool,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            tol_constraint: 1e-12,
            tol_fixed_point: 1e-10,
            max_outer: 500,
            mu_bracket: (1e-3, 1.0),
            fallback: true,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::Parameter(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.tol_constraint > 0.0 && self.tol_fixed_point > 0.0) {
            return Err(Error::Parameter("inverse tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Parameter("max_outer must be >= 1".into()));
        }
        let (lo, hi) = self.mu_bracket;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Parameter(format!("mu bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")));
        }
        Ok(())
    }

    /// `p = q alpha / (alpha - 1)`.
    pub fn p(&self, q: f64) -> f64 {
        q * self.alpha / (self.alpha - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InverseStatus {
    Solved,
    /// `lambda <= lambda1(rho_bar)`: the prior already satisfies the
    /// constraint and no nonnegative (p,q) solution exists.
    PriorAlreadyFeasible,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// Max over cells of `|(rho-rho_bar)^(alpha-1) - mu^(alpha-1) |grad phi1|^q|`
    /// relative to the largest right-hand side.
    pub stationarity: f64,
    /// `|lambda - lambda1(rho_hat)|`.
    pub constraint_residual: f64,
    /// `min(rho_hat - rho_bar)`.
    pub sign_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||rho_{k+1} - rho_k||_alpha / ||rho_k||_alpha`.
    pub step: f64,
    /// Undamped fixed-point mismatch `mu ||c_k - T(c_k)||_alpha / ||rho_k||_alpha`
    /// between the current correction shape and its image.
    pub residual: f64,
    pub damping: f64,
    /// `|lambda1(rho_{k+1}) - lambda|`.
    pub constraint_residual: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseSolution {
    pub rho_hat: CellField,
    pub mu: f64,
    pub lambda_target: f64,
    pub lambda_achieved: f64,
    /// `lambda1(rho_bar)`.
    pub lambda1_prior: f64,
    pub eigenpair_at_rho_hat: EigenPair,
    /// `||rho_hat - rho_bar||_alpha`.
    pub distance: f64,
    pub status: InverseStatus,
    pub outer_iterations: usize,
    pub used_fallback: bool,
    pub kkt_report: Option<KktReport>,
    pub history: Vec<IterationRecord>,
}

/// `(lambda / lambda1(rho)) rho`, which has principal eigenvalue exactly
/// `lambda` because `lambda1` is 1-homogeneous in the density.
pub fn scale_to_feasible(rho: &CellField, lambda_target: f64, eig: &EigenPair) -> Result<CellField> {
    if !(eig.lambda1 > 0.0) {
        return Err(Error::Admissibility(format!("lambda1 must be positive to rescale, got {}", eig.lambda1)));
    }
    if !(lambda_target > 0.0) {
        return Err(Error::Parameter(format!("target eigenvalue must be positive, got {lambda_target}")));
    }
    Ok(rho.scaled(lambda_target / eig.lambda1))
}

/// Band within which `lambda` and `lambda1(rho_bar)` count as equal.
pub(crate) fn tie_band(eig_cfg: &EigSolverConfig) -> f64 {
    10.0 * eig_cfg.tol_lambda
}

pub fn solve_inverse(
    grid: &Grid,
    rho_bar: &CellField,
    b: &NodalField,
    lambda_target: f64,
    q: f64,
    cfg: &InverseConfig,
    eig_cfg: &EigSolverConfig,
) -> Result<InverseSolution> {
    solve_inverse_from(grid, rho_bar, b, lambda_target, q, cfg, eig_cfg, None)
}

/// Same as [`solve_inverse`], starting the fixed-point iteration from `init`
/// (which must be a positive density) instead of the prior.
#[allow(clippy::too_many_arguments)]
pub fn solve_inverse_from(
    grid: &Grid,
    rho_bar: &CellField,
    b: &NodalField,
    lambda_target: f64,
    q: f64,
    cfg: &InverseConfig,
    eig_cfg: &EigSolverConfig,
    init: Option<&CellField>,
) -> Result<InverseSolution> {
    check_q(q)?;
    cfg.validate()?;
    rho_bar.check_density(grid)?;
    check_len(grid.node_count(), b.len())?;
    if !(lambda_target.is_finite() && lambda_target > 0.0) {
        return Err(Error::Parameter(format!("target eigenvalue must be positive, got {lambda_target}")));
    }

    let prior = principal_eigenpair(grid, rho_bar, b, q, eig_cfg)?;
    if lambda_target <= prior.lambda1 * (1.0 + tie_band(eig_cfg)) {
        return Ok(InverseSolution {
            rho_hat: rho_bar.clone(),
            mu: 0.0,
            lambda_target,
            lambda_achieved: prior.lambda1,
            lambda1_prior: prior.lambda1,
            eigenpair_at_rho_hat: prior.clone(),
            distance: 0.0,
            status: InverseStatus::PriorAlreadyFeasible,
            outer_iterations: 0,
            used_fallback: false,
            kkt_report: None,
            history: Vec::new(),
        });
    }

    let exponent = q / (cfg.alpha - 1.0);
    let (mut rho, mut eig) = match init {
        Some(r) => {
            r.check_density(grid)?;
            let e = principal_eigenpair_from(grid, r, b, q, eig_cfg, Some(&prior.phi1))?;
            (r.clone(), e)
        }
        None => (rho_bar.clone(), prior.clone()),
    };
    let mut mu = cfg.mu_bracket.0;
    let mut history = Vec::new();
    let mut status = InverseStatus::NotConverged;
    let mut used_fallback = false;
    // current correction shape (unit L^alpha norm) and damping factor
    let mut shape: Option<CellField> = None;
    let mut theta: f64 = 1.0;
    let mut last_residual = f64::INFINITY;

    for k in 1..=cfg.max_outer {
        let target = normalized(grid, correction(grid, &eig.phi1, exponent), cfg.alpha)?;
        let (next_shape, residual) = match &shape {
            None => (target, f64::INFINITY),
            Some(c) => {
                let scale = mu * grid.cell_norm(&c.sub(&target), cfg.alpha)? / grid.cell_norm(&rho, cfg.alpha)?;
                if scale > last_residual {
                    theta = (0.5 * theta).max(MIN_DAMPING);
                } else {
                    theta = (1.25 * theta).min(1.0);
                }
                last_residual = scale;
                (c.scaled(1.0 - theta).add(&target.scaled(theta)), scale)
            }
        };
        let (mu_k, eig_k) =
            solve_multiplier(grid, rho_bar, &next_shape, b, q, lambda_target, &prior, &eig.phi1, mu, cfg, eig_cfg)?;
        let next = rho_bar.add(&next_shape.scaled(mu_k));
        let step = grid.cell_norm(&next.sub(&rho), cfg.alpha)? / grid.cell_norm(&rho, cfg.alpha)?;
        history.push(IterationRecord {
            iteration: k,
            step,
            residual,
            damping: theta,
            constraint_residual: (eig_k.lambda1 - lambda_target).abs(),
            mu: mu_k,
        });
        rho = next;
        eig = eig_k;
        mu = mu_k;
        shape = Some(next_shape);
        if step < cfg.tol_fixed_point && residual < cfg.tol_fixed_point {
            status = InverseStatus::Solved;
            break;
        }
        if stalled(&history) {
            break;
        }
    }
    let mut mu_final = fit_multiplier(grid, rho_bar, &rho, &eig.phi1, exponent);

    if status != InverseStatus::Solved && cfg.fallback {
        used_fallback = true;
        let (r, e, ok) = projected_supergradient(grid, rho_bar, b, lambda_target, q, cfg, eig_cfg, rho, eig, &mut history)?;
        rho = r;
        eig = e;
        mu_final = fit_multiplier(grid, rho_bar, &rho, &eig.phi1, exponent);
        if ok {
            status = InverseStatus::Solved;
        }
    }

    let distance = grid.cell_norm(&rho.sub(rho_bar), cfg.alpha)?;
    let mut sol = InverseSolution {
        rho_hat: rho,
        mu: mu_final,
        lambda_target,
        lambda_achieved: eig.lambda1,
        lambda1_prior: prior.lambda1,
        eigenpair_at_rho_hat: eig,
        distance,
        status,
        outer_iterations: history.len(),
        used_fallback,
        kkt_report: None,
        history,
    };
    if sol.status == InverseStatus::Solved {
        sol.kkt_report = Some(kkt_report(grid, &sol, rho_bar, b, q, cfg.alpha)?);
    }
    Ok(sol)
}

/// KKT diagnostics of a solved instance; the constraint residual is
/// re-evaluated from the stored eigenfunction.
pub fn kkt_report(grid: &Grid, sol: &InverseSolution, rho_bar: &CellField, b: &NodalField, q: f64, alpha: f64) -> Result<KktReport> {
    if sol.status != InverseStatus::Solved {
        return Err(Error::Precondition(format!("KKT report needs a solved instance, status is {:?}", sol.status)));
    }
    check_len(grid.cell_count(), rho_bar.len())?;
    check_len(grid.cell_count(), sol.rho_hat.len())?;
    let grads = grid.cell_gradient(&sol.eigenpair_at_rho_hat.phi1)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut sign_min = f64::INFINITY;
    for ((r, rb), g) in sol.rho_hat.iter().zip(rho_bar.iter()).zip(grads.magnitudes.iter()) {
        let d = r - rb;
        sign_min = sign_min.min(d);
        let lhs = d.signum() * d.abs().powf(alpha - 1.0);
        let rhs = sol.mu.powf(alpha - 1.0) * g.powf(q);
        worst = worst.max((lhs - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    let stationarity = if scale > 0.0 { worst / scale } else { worst };
    let lambda = rayleigh_quotient(grid, &sol.rho_hat, b, &sol.eigenpair_at_rho_hat.phi1, q)?;
    Ok(KktReport { stationarity, constraint_residual: (sol.lambda_target - lambda).abs(), sign_min })
}

/// `|grad phi|^exponent` per cell.
fn correction(grid: &Grid, phi: &NodalField, exponent: f64) -> CellField {
    CellField::new(
        grid.cells()
            .iter()
            .map(|c| {
                let g = c.gradient(phi);
                g[0].hypot(g[1]).powf(exponent)
            })
            .collect(),
    )
}

const MIN_DAMPING: f64 = 1e-3;

fn normalized(grid: &Grid, f: CellField, alpha: f64) -> Result<CellField> {
    let n = grid.cell_norm(&f, alpha)?;
    if !(n > 0.0) {
        return Err(Error::DegenerateInput("eigenfunction gradient vanishes identically".into()));
    }
    Ok(f.scaled(1.0 / n))
}

/// Least-squares `mu` with `rho - rho_bar ~ mu |grad phi|^exponent`.
fn fit_multiplier(grid: &Grid, rho_bar: &CellField, rho: &CellField, phi: &NodalField, exponent: f64) -> f64 {
    let corr = correction(grid, phi, exponent);
    let d = rho.sub(rho_bar);
    let num = grid.cell_inner(&d, &corr).unwrap_or(0.0);
    let den = grid.cell_inner(&corr, &corr).unwrap_or(0.0);
    if den > 0.0 { num / den } else { 0.0 }
}

/// The fixed point is considered stalled when the undamped residual has not
/// shrunk by at least 5% over the last 20 iterations.
fn stalled(history: &[IterationRecord]) -> bool {
    let n = history.len();
    n > 40 && history[n - 1].residual > 0.95 * history[n - 21].residual
}

/// Finds `mu` with `lambda1(rho_bar + mu corr) = lambda` by Newton steps
/// safeguarded with bisection. The map is increasing and concave in `mu`,
/// so Newton iterates approach the root from below.
#[allow(clippy::too_many_arguments)]
fn solve_multiplier(
    grid: &Grid,
    rho_bar: &CellField,
    corr: &CellField,
    b: &NodalField,
    q: f64,
    lambda: f64,
    prior: &EigenPair,
    guess: &NodalField,
    mu_start: f64,
    cfg: &InverseConfig,
    eig_cfg: &EigSolverConfig,
) -> Result<(f64, EigenPair)> {
    if corr.iter().all(|&c| c == 0.0) {
        return Err(Error::DegenerateInput("eigenfunction gradient vanishes identically".into()));
    }
    let eval = |mu: f64, phi: &NodalField| -> Result<EigenPair> {
        principal_eigenpair_from(grid, &rho_bar.add(&corr.scaled(mu)), b, q, eig_cfg, Some(phi))
    };
    // lambda1(rho_bar) < lambda, so mu = 0 is a valid lower end
    let mut lo = 0.0;
    let mut hi = cfg.mu_bracket.1.max(2.0 * mu_start);
    let mut hi_pair = eval(hi, guess)?;
    let mut expansions = 0;
    while hi_pair.lambda1 < lambda {
        lo = hi;
        hi *= 2.0;
        hi_pair = eval(hi, &hi_pair.phi1)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::DegenerateInput("could not bracket the multiplier".into()));
        }
    }
    if (hi_pair.lambda1 - lambda).abs() <= cfg.tol_constraint * lambda {
        return Ok((hi, hi_pair));
    }

    let mut mu = if mu_start > lo && mu_start < hi { mu_start } else { 0.5 * (lo + hi) };
    let mut pair = if lo == 0.0 && mu == 0.0 { prior.clone() } else { eval(mu, &hi_pair.phi1)? };
    for _ in 0..200 {
        let f = pair.lambda1 - lambda;
        if f.abs() <= cfg.tol_constraint * lambda {
            return Ok((mu, pair));
        }
        if f < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let slope = eigenvalue_derivative(grid, &pair, b, q, corr)?;
        let newton = mu - f / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - mu).abs() <= 1e-15 * mu.abs().max(1e-300) {
            // the bracket collapsed at rounding level
            return Ok((mu, pair));
        }
        mu = next;
        pair = eval(mu, &pair.phi1)?;
    }
    Err(Error::DegenerateInput("multiplier search did not converge".into()))
}

/// Projected supergradient descent on `||rho - rho_bar||_alpha^alpha` over
/// `{lambda1 >= lambda}`: step along the objective gradient projected onto the
/// tangent of the constraint, clip to `rho >= rho_bar`, and return to the
/// constraint surface by homogeneity scaling. Returns the best iterate and
/// whether it met the fixed-point tolerance.
#[allow(clippy::too_many_arguments)]
fn projected_supergradient(
    grid: &Grid,
    rho_bar: &CellField,
    b: &NodalField,
    lambda: f64,
    q: f64,
    cfg: &InverseConfig,
    eig_cfg: &EigSolverConfig,
    start: CellField,
    start_eig: EigenPair,
    history: &mut Vec<IterationRecord>,
) -> Result<(CellField, EigenPair, bool)> {
    let alpha = cfg.alpha;
    let objective = |r: &CellField| grid.cell_norm(&r.sub(rho_bar), alpha).map(|d| d.powf(alpha));
    let mut rho = start;
    let mut eig = start_eig;
    let mut best = (objective(&rho)?, rho.clone(), eig.clone());
    let offset = history.len();
    let base = grid.cell_norm(&rho.sub(rho_bar), alpha)?.max(1e-12);
    let mut ok = false;
    for j in 0..cfg.max_outer {
        let d = rho.sub(rho_bar);
        let grad_obj = CellField::new(d.iter().map(|v| alpha * v.signum() * v.abs().powf(alpha - 1.0)).collect());
        let den = crate::assembly::b_norm_q(grid, b, &eig.phi1, q)?;
        let grad_lam = CellField::new(correction(grid, &eig.phi1, q).iter().map(|v| v / den).collect());
        let gl2 = grid.cell_inner(&grad_lam, &grad_lam)?;
        let proj = grid.cell_inner(&grad_obj, &grad_lam)? / gl2;
        let dir = CellField::new(grad_obj.iter().zip(grad_lam.iter()).map(|(o, l)| -o + proj * l).collect());
        let dnorm = grid.cell_norm(&dir, 2.0)?;
        if dnorm == 0.0 {
            ok = true;
            break;
        }
        let t = 0.5 * base / dnorm / (j as f64 + 1.0);
        let moved = CellField::new(
            rho.iter().zip(dir.iter()).zip(rho_bar.iter()).map(|((r, d), rb)| (r + t * d).max(*rb)).collect(),
        );
        let moved_eig = principal_eigenpair_from(grid, &moved, b, q, eig_cfg, Some(&eig.phi1))?;
        let next = scale_to_feasible(&moved, lambda, &moved_eig)?;
        let next_eig = EigenPair { lambda1: lambda, ..moved_eig };
        let step = grid.cell_norm(&next.sub(&rho), alpha)? / grid.cell_norm(&rho, alpha)?;
        history.push(IterationRecord {
            iteration: offset + j + 1,
            step,
            residual: f64::NAN,
            damping: f64::NAN,
            constraint_residual: (next_eig.lambda1 - lambda).abs(),
            mu: f64::NAN,
        });
        rho = next;
        eig = next_eig;
        let obj = objective(&rho)?;
        if obj < best.0 {
            best = (obj, rho.clone(), eig.clone());
        }
        if step < cfg.tol_fixed_point {
            ok = true;
            break;
        }
    }
    // re-solve at the returned density so the stored pair is exact
    let final_eig = principal_eigenpair_from(grid, &best.1, b, q, eig_cfg, Some(&best.2.phi1))?;
    let feasible = (final_eig.lambda1 - lambda).abs() <= cfg.tol_constraint.max(1e-9) * lambda;
    Ok((best.1, final_eig, ok && feasible))
}
