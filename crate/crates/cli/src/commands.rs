//! The four subcommands. Each writes its artifacts into the output directory
//! and reports the files written together with the process exit code.

use std::path::PathBuf;

use qplap_core::{
    construct_solution, eigen_residual, existence_verdict, principal_eigenpair, solve_inverse, Dim, EigenPair,
    EnergyReport, Error, Existence, InverseSolution, InverseStatus, KktReport, ProbeReport,
};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{
    coord_cells, coord_header, heatmaps, line_plot, nodal_rows, num, write_csv, write_json, write_svg,
};
use crate::probes::{check_names, run_probe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Inverse,
    SolvePq,
    Probe,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable notes for stderr.
    pub notes: Vec<String>,
    pub exit_code: i32,
}

pub fn run(cmd: Command, r: &Resolved) -> Result<Outcome, CliError> {
    match cmd {
        Command::Eig => run_eig(r),
        Command::Inverse => run_inverse(r),
        Command::SolvePq => run_pq(r),
        Command::Probe => run_probes(r),
    }
}

const NONEXISTENCE: &str =
    "lambda <= lambda1(rho_bar): the prior already satisfies the constraint and the (p,q) problem has no nonnegative weak solution";

#[derive(Serialize)]
struct EigReport {
    q: f64,
    dim: Dim,
    nodes: usize,
    cells: usize,
    converged: bool,
    lambda1: f64,
    iterations: usize,
    inner_iterations: usize,
    final_increment: f64,
    residual: f64,
}

pub fn run_eig(r: &Resolved) -> Result<Outcome, CliError> {
    let (pair, converged) = match principal_eigenpair(&r.grid, &r.rho_bar, &r.b, r.q, &r.config.eig) {
        Ok(p) => (p, true),
        Err(Error::NotConverged(p)) => (*p, false),
        Err(e) => return Err(e.into()),
    };
    let residual = eigen_residual(&r.grid, &r.rho_bar, &r.b, &pair, r.q)?;
    let report = EigReport {
        q: r.q,
        dim: r.grid.dim(),
        nodes: r.grid.node_count(),
        cells: r.grid.cell_count(),
        converged,
        lambda1: pair.lambda1,
        iterations: pair.iterations,
        inner_iterations: pair.inner_iterations,
        final_increment: pair.final_increment,
        residual,
    };
    let mut out = Outcome::default();
    out.files.push(write_json(&r.output_dir.join("eig.json"), &report)?);
    out.files.push(write_phi(r, &pair)?);
    if !converged {
        out.exit_code = 2;
        out.notes.push(format!("eigensolver did not converge after {} iterations", pair.iterations));
    }
    Ok(out)
}

fn write_phi(r: &Resolved, pair: &EigenPair) -> Result<PathBuf, CliError> {
    let mut header = coord_header(&r.grid);
    header.push("phi1");
    write_csv(&r.output_dir.join("phi1.csv"), &header, &nodal_rows(&r.grid, &pair.phi1))
}

#[derive(Serialize)]
struct InverseReport<'a> {
    status: InverseStatus,
    q: f64,
    alpha: f64,
    p: f64,
    mu: f64,
    lambda_target: f64,
    lambda_achieved: f64,
    lambda1_prior: f64,
    distance: f64,
    outer_iterations: usize,
    used_fallback: bool,
    kkt_report: Option<KktReport>,
    message: Option<&'a str>,
}

fn target(r: &Resolved) -> Result<f64, CliError> {
    r.config.lambda_target.ok_or_else(|| CliError::Config {
        line: None,
        message: "lambda_target is required for this command".into(),
    })
}

pub fn run_inverse(r: &Resolved) -> Result<Outcome, CliError> {
    let lambda = target(r)?;
    let sol = solve_inverse(&r.grid, &r.rho_bar, &r.b, lambda, r.q, &r.config.inverse, &r.config.eig)?;
    let message = (sol.status == InverseStatus::PriorAlreadyFeasible).then_some(NONEXISTENCE);
    let report = InverseReport {
        status: sol.status,
        q: r.q,
        alpha: r.alpha,
        p: r.p,
        mu: sol.mu,
        lambda_target: sol.lambda_target,
        lambda_achieved: sol.lambda_achieved,
        lambda1_prior: sol.lambda1_prior,
        distance: sol.distance,
        outer_iterations: sol.outer_iterations,
        used_fallback: sol.used_fallback,
        kkt_report: sol.kkt_report,
        message,
    };
    let dir = &r.output_dir;
    let mut out = Outcome::default();
    out.files.push(write_json(&dir.join("inverse.json"), &report)?);

    let mut header = coord_header(&r.grid);
    header.extend(["rho_bar", "rho_hat"]);
    let rows: Vec<Vec<String>> = r
        .grid
        .cell_midpoints()
        .iter()
        .zip(r.rho_bar.iter().zip(sol.rho_hat.iter()))
        .map(|(m, (rb, rh))| {
            let mut row = coord_cells(&r.grid, *m);
            row.extend([num(*rb), num(*rh)]);
            row
        })
        .collect();
    out.files.push(write_csv(&dir.join("rho_hat.csv"), &header, &rows)?);

    let rows: Vec<Vec<String>> = sol
        .history
        .iter()
        .map(|h| vec![h.iteration.to_string(), num(h.step), num(h.constraint_residual)])
        .collect();
    out.files.push(write_csv(&dir.join("convergence.csv"), &["iteration", "step", "constraint_residual"], &rows)?);

    let u_hat = match sol.status {
        InverseStatus::Solved => {
            let pq = construct_solution(&r.grid, &sol, &r.rho_bar, &r.b, r.q, r.alpha)?;
            out.files.push(write_u_hat(r, &pq.u_hat)?);
            Some(pq.u_hat.into_values())
        }
        InverseStatus::PriorAlreadyFeasible => {
            out.notes.push(NONEXISTENCE.to_string());
            None
        }
        InverseStatus::NotConverged => {
            out.exit_code = 2;
            out.notes.push(format!("inverse solve did not converge after {} iterations", sol.outer_iterations));
            None
        }
    };
    if r.config.svg {
        out.files.push(write_summary(r, &sol, u_hat.as_deref())?);
    }
    Ok(out)
}

fn write_u_hat(r: &Resolved, u: &[f64]) -> Result<PathBuf, CliError> {
    let mut header = coord_header(&r.grid);
    header.push("u_hat");
    write_csv(&r.output_dir.join("u_hat.csv"), &header, &nodal_rows(&r.grid, u))
}

fn write_summary(r: &Resolved, sol: &InverseSolution, u: Option<&[f64]>) -> Result<PathBuf, CliError> {
    let svg = match r.grid.dim() {
        Dim::One => {
            let mx: Vec<f64> = r.grid.cell_midpoints().iter().map(|m| m[0]).collect();
            let nx: Vec<f64> = r.grid.coords().iter().map(|c| c[0]).collect();
            let top = line_plot("densities", &[("rho_bar", &mx, &r.rho_bar), ("rho_hat", &mx, &sol.rho_hat)]);
            match u {
                Some(u) => stack(&[top, line_plot("u_hat", &[("u_hat", &nx, u)])]),
                None => top,
            }
        }
        Dim::Two => {
            let avg: Option<Vec<f64>> = u.map(|u| r.grid.cells().iter().map(|c| c.average(u)).collect());
            let mut panels: Vec<(&str, &[f64])> = vec![("rho_bar", &r.rho_bar), ("rho_hat", &sol.rho_hat)];
            if let Some(a) = &avg {
                panels.push(("u_hat", a));
            }
            heatmaps(&r.grid, &panels)
        }
    };
    write_svg(&r.output_dir.join("summary.svg"), &svg)
}

/// Stacks complete SVG documents vertically inside one document.
fn stack(parts: &[String]) -> String {
    let h = 360.0;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"{0}\" viewBox=\"0 0 640 {0}\">\n",
        h * parts.len() as f64
    );
    for (i, p) in parts.iter().enumerate() {
        s.push_str(&p.replacen("<svg ", &format!("<svg y=\"{}\" ", h * i as f64), 1));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
struct PqReport<'a> {
    existence: Existence,
    lambda: f64,
    lambda1_prior: f64,
    band: f64,
    q: f64,
    alpha: f64,
    p: f64,
    inverse_status: Option<InverseStatus>,
    mu: Option<f64>,
    residual_max: Option<f64>,
    verified: Option<bool>,
    rayleigh_identity: Option<f64>,
    energy_report: Option<EnergyReport>,
    message: Option<&'a str>,
}

pub fn run_pq(r: &Resolved) -> Result<Outcome, CliError> {
    let lambda = target(r)?;
    let verdict = existence_verdict(&r.grid, &r.rho_bar, &r.b, r.q, lambda, &r.config.eig)?;
    let mut report = PqReport {
        existence: verdict.existence,
        lambda,
        lambda1_prior: verdict.lambda1,
        band: verdict.band,
        q: r.q,
        alpha: r.alpha,
        p: r.p,
        inverse_status: None,
        mu: None,
        residual_max: None,
        verified: None,
        rayleigh_identity: None,
        energy_report: None,
        message: None,
    };
    let mut out = Outcome::default();
    let path = r.output_dir.join("pq.json");
    if verdict.existence == Existence::NoSolution {
        report.message = Some(NONEXISTENCE);
        out.notes.push(NONEXISTENCE.to_string());
        out.files.push(write_json(&path, &report)?);
        return Ok(out);
    }
    let sol = solve_inverse(&r.grid, &r.rho_bar, &r.b, lambda, r.q, &r.config.inverse, &r.config.eig)?;
    report.inverse_status = Some(sol.status);
    report.mu = Some(sol.mu);
    if sol.status != InverseStatus::Solved {
        out.exit_code = 2;
        out.notes.push(format!("inverse solve ended with status {:?}", sol.status));
        out.files.push(write_json(&path, &report)?);
        return Ok(out);
    }
    let pq = construct_solution(&r.grid, &sol, &r.rho_bar, &r.b, r.q, r.alpha)?;
    report.residual_max = Some(pq.residual_max);
    report.verified = Some(pq.verified);
    report.rayleigh_identity = Some(pq.rayleigh_identity());
    report.energy_report = Some(pq.energy_report);
    if !pq.verified {
        out.exit_code = 2;
        out.notes.push(format!("weak residual {:e} above certificate tolerance", pq.residual_max));
    }
    out.files.push(write_json(&path, &report)?);
    out.files.push(write_u_hat(r, &pq.u_hat)?);
    Ok(out)
}

#[derive(Serialize)]
struct ProbeSummary {
    name: String,
    pass: bool,
    samples: usize,
    failures: usize,
    worst_violation: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct Aggregate {
    pass: bool,
    seed: u64,
    probes: Vec<ProbeSummary>,
}

pub fn run_probes(r: &Resolved) -> Result<Outcome, CliError> {
    check_names(&r.config.probes)?;
    let mut out = Outcome::default();
    let mut reports: Vec<ProbeReport> = Vec::new();
    for name in &r.config.probes {
        let rep = run_probe(name, r)?;
        out.files.push(write_json(&r.output_dir.join(format!("{name}.json")), &rep)?);
        reports.push(rep);
    }
    let agg = Aggregate {
        pass: reports.iter().all(|p| p.pass),
        seed: r.config.seed,
        probes: reports
            .iter()
            .map(|p| ProbeSummary {
                name: p.name.clone(),
                pass: p.pass,
                samples: p.samples,
                failures: p.failures,
                worst_violation: p.worst_violation,
                tolerance: p.tolerance,
            })
            .collect(),
    };
    out.files.push(write_json(&r.output_dir.join("probes.json"), &agg)?);
    let failed: Vec<String> = agg.probes.iter().filter(|p| !p.pass).map(|p| p.name.clone()).collect();
    if !failed.is_empty() {
        out.exit_code = 2;
        out.notes.push(CliError::ProbesFailed(failed).to_string());
    }
    Ok(out)
}
