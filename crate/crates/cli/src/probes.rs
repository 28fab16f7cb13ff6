//! Probe suite driven by a run configuration.

use qplap_core::oracles::{
    concavity_probe, picone_refinement_probe, stability_sweep, usc_probe, Sweep, UscStep,
};
use qplap_core::{principal_eigenpair, CellField, Dim, Grid, NodalField, ProbeReport};

use crate::config::Resolved;
use crate::error::CliError;

pub const PROBE_NAMES: [&str; 4] = ["concavity", "picone", "semicontinuity", "stability"];

pub fn usage() -> String {
    format!("probe list is empty; set \"probes\" in the config to any of: {}", PROBE_NAMES.join(", "))
}

/// Checks the requested names before any probe runs.
pub fn check_names(names: &[String]) -> Result<(), CliError> {
    if names.is_empty() {
        return Err(CliError::Usage(usage()));
    }
    if let Some(bad) = names.iter().find(|n| !PROBE_NAMES.contains(&n.as_str())) {
        return Err(CliError::Usage(format!("unknown probe `{bad}`; known probes: {}", PROBE_NAMES.join(", "))));
    }
    Ok(())
}

pub fn run_probe(name: &str, r: &Resolved) -> Result<ProbeReport, CliError> {
    let cfg = &r.config;
    let ps = &cfg.probe_settings;
    let seed = cfg.seed;
    let report = match name {
        "concavity" => concavity_probe(&r.grid, &r.b, r.q, ps.samples, &ps.t_grid, seed, &cfg.eig)?,
        "picone" => {
            let grids = ps
                .picone_cells
                .iter()
                .map(|&n| cfg.domain.with_cells(n).grid())
                .collect::<qplap_core::Result<Vec<Grid>>>()?;
            picone_refinement_probe(&grids, r.q, ps.picone_eps, ps.picone_samples, seed)?
        }
        "semicontinuity" => {
            let steps = (0..ps.usc_levels)
                .map(|k| spike_step(r, 1 << k))
                .collect::<Result<Vec<UscStep>, CliError>>()?;
            let mut rep = usc_probe(&steps, r.q, ps.usc_tol, &cfg.eig)?;
            rep.seed = seed;
            rep
        }
        "stability" => {
            let base = match cfg.lambda_target {
                Some(l) => l,
                None => 2.0 * principal_eigenpair(&r.grid, &r.rho_bar, &r.b, r.q, &cfg.eig)?.lambda1,
            };
            let lambdas = (1..=ps.sweep_steps).map(|n| base * (1.0 + 0.5f64.powi(n as i32))).collect();
            let sweep = Sweep::Lambda { rho_bar: r.rho_bar.clone(), lambdas };
            let mut rep = stability_sweep(&r.grid, &r.b, r.q, &sweep, &cfg.inverse, &cfg.eig, ps.sweep_tol)?;
            rep.seed = seed;
            rep
        }
        other => return Err(CliError::Usage(format!("unknown probe `{other}`"))),
    };
    Ok(report)
}

/// The prior on a grid refined `k` times, plus a spike of height `1/h` on
/// the cell nearest the domain centre.
fn spike_step(r: &Resolved, k: usize) -> Result<UscStep, CliError> {
    let grid = r.config.domain.refined(k).grid()?;
    let rho_limit = CellField::from_fn(&grid, |x| r.rho_expr.eval(x[0], x[1]));
    let b = NodalField::from_fn(&grid, |x| r.b_expr.eval(x[0], x[1]));
    let [[ax, ay], [bx, by]] = grid.bounds();
    let centre = [0.5 * (ax + bx), 0.5 * (ay + by)];
    let mids = grid.cell_midpoints();
    let dist = |m: &[f64; 2]| (m[0] - centre[0]).hypot(m[1] - centre[1]);
    let target = (0..mids.len()).min_by(|&i, &j| dist(&mids[i]).total_cmp(&dist(&mids[j]))).unwrap_or(0);
    let d = if grid.dim() == Dim::One { 1.0 } else { 2.0 };
    let h = grid.cells()[target].measure().powf(1.0 / d);
    let mut rho_n = rho_limit.clone();
    rho_n[target] += 1.0 / h;
    Ok(UscStep { grid, b, rho_limit, rho_n, size: h })
}
