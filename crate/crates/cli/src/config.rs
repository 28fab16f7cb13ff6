//! JSON run configuration and its validation into solver inputs.

use std::path::PathBuf;

use qplap_core::{CellField, EigSolverConfig, Grid, InverseConfig, NodalField};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { a: f64, b: f64, cells: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

impl DomainSpec {
    pub fn grid(&self) -> qplap_core::Result<Grid> {
        match *self {
            DomainSpec::Interval { a, b, cells } => Grid::interval(a, b, cells),
            DomainSpec::Rectangle { lx, ly, nx, ny } => Grid::rectangle(lx, ly, nx, ny),
        }
    }

    /// Same domain with every cell count multiplied by `k`.
    pub fn refined(&self, k: usize) -> DomainSpec {
        match *self {
            DomainSpec::Interval { a, b, cells } => DomainSpec::Interval { a, b, cells: cells * k },
            DomainSpec::Rectangle { lx, ly, nx, ny } => DomainSpec::Rectangle { lx, ly, nx: nx * k, ny: ny * k },
        }
    }

    /// Same domain with `n` cells per direction.
    pub fn with_cells(&self, n: usize) -> DomainSpec {
        match *self {
            DomainSpec::Interval { a, b, .. } => DomainSpec::Interval { a, b, cells: n },
            DomainSpec::Rectangle { lx, ly, .. } => DomainSpec::Rectangle { lx, ly, nx: n, ny: n },
        }
    }
}

/// A constant or an expression in `x`, `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Expression(String),
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(1.0)
    }
}

impl Coefficient {
    pub fn compile(&self) -> Result<Expr, crate::expr::ExprError> {
        match self {
            Coefficient::Constant(v) => Ok(Expr::Num(*v)),
            Coefficient::Expression(s) => Expr::parse(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    /// Density pairs for the concavity probe.
    pub samples: usize,
    pub t_grid: Vec<f64>,
    pub picone_samples: usize,
    /// Cells per direction of the Picone refinement sequence.
    pub picone_cells: Vec<usize>,
    pub picone_eps: f64,
    /// Number of nested grids in the semicontinuity probe.
    pub usc_levels: usize,
    pub usc_tol: f64,
    /// Terms of the stability sweep `lambda_n = lambda (1 + 2^-n)`.
    pub sweep_steps: usize,
    pub sweep_tol: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            samples: 50,
            t_grid: (1..10).map(|i| i as f64 / 10.0).collect(),
            picone_samples: 30,
            picone_cells: vec![16, 32, 64, 128],
            picone_eps: 1e-3,
            usc_levels: 5,
            usc_tol: 1e-3,
            sweep_steps: 8,
            sweep_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub q: f64,
    /// Overrides `inverse.alpha` when present.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub b: Coefficient,
    #[serde(default)]
    pub rho_bar: Coefficient,
    #[serde(default)]
    pub lambda_target: Option<f64>,
    #[serde(default)]
    pub eig: EigSolverConfig,
    #[serde(default)]
    pub inverse: InverseConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub probes: Vec<String>,
    #[serde(default)]
    pub probe_settings: ProbeSettings,
}

/// Validated configuration with the grid and coefficient fields built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub grid: Grid,
    pub rho_bar: CellField,
    pub b: NodalField,
    pub rho_expr: Expr,
    pub b_expr: Expr,
    pub q: f64,
    pub alpha: f64,
    pub p: f64,
    pub output_dir: PathBuf,
}

/// Line of the shallowest object key named `key`, first one on ties.
fn line_of(src: &str, key: &str) -> Option<usize> {
    let bytes = src.as_bytes();
    let (mut depth, mut line, mut i) = (0usize, 1usize, 0usize);
    let mut best: Option<(usize, usize)> = None;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => line += 1,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth = depth.saturating_sub(1),
            b'"' => {
                let start = i + 1;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    if bytes[i] == b'\\' {
                        i += 1;
                    }
                    i += 1;
                }
                let word = src.get(start..i.min(bytes.len())).unwrap_or("");
                let is_key = src[(i + 1).min(src.len())..].trim_start().starts_with(':');
                if is_key && word == key && best.is_none_or(|(d, _)| depth < d) {
                    best = Some((depth, line));
                }
            }
            _ => {}
        }
        i += 1;
    }
    best.map(|(_, l)| l)
}

fn err(src: &str, key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { line: line_of(src, key), message: message.into() }
}

pub fn parse(src: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(src).map_err(|e| CliError::Config { line: Some(e.line()), message: e.to_string() })
}

pub fn resolve(src: &str, overrides_seed: Option<u64>, overrides_out: Option<PathBuf>) -> Result<Resolved, CliError> {
    let mut config = parse(src)?;
    if let Some(s) = overrides_seed {
        config.seed = s;
    }
    let q = config.q;
    if !(q.is_finite() && q >= 2.0) {
        return Err(err(src, "q", format!("q must be a finite number >= 2, got {q}")));
    }
    let alpha = match config.alpha {
        Some(a) => {
            let inner = config.inverse.alpha;
            if inner != InverseConfig::default().alpha && inner != a {
                return Err(err(src, "alpha", format!("alpha given twice with different values ({a} and {inner})")));
            }
            a
        }
        None => config.inverse.alpha,
    };
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(err(src, "alpha", format!("alpha must exceed 1, got {alpha}")));
    }
    config.inverse.alpha = alpha;
    let p = q * alpha / (alpha - 1.0);
    config.eig.validate().map_err(|e| err(src, "eig", e.to_string()))?;
    config.inverse.validate().map_err(|e| err(src, "inverse", e.to_string()))?;
    if let Some(l) = config.lambda_target {
        if !(l.is_finite() && l > 0.0) {
            return Err(err(src, "lambda_target", format!("lambda_target must be positive, got {l}")));
        }
    }
    let grid = config.domain.grid().map_err(|e| err(src, "domain", e.to_string()))?;

    let b_expr = config.b.compile().map_err(|e| err(src, "b", format!("in b: {e}")))?;
    let rho_expr = config.rho_bar.compile().map_err(|e| err(src, "rho_bar", format!("in rho_bar: {e}")))?;
    let b = NodalField::from_fn(&grid, |x| b_expr.eval(x[0], x[1]));
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        let c = grid.coords()[i];
        return Err(err(src, "b", format!("b is not finite at ({}, {})", c[0], c[1])));
    }
    let rho_bar = CellField::from_fn(&grid, |x| rho_expr.eval(x[0], x[1]));
    let mids = grid.cell_midpoints();
    if let Some(i) = rho_bar.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(err(
            src,
            "rho_bar",
            format!("rho_bar must be positive, got {} at ({}, {})", rho_bar[i], mids[i][0], mids[i][1]),
        ));
    }
    let ps = &config.probe_settings;
    if ps.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(err(src, "t_grid", "t_grid values must lie in [0, 1]"));
    }
    if !(ps.picone_eps > 0.0) {
        return Err(err(src, "picone_eps", "picone_eps must be positive"));
    }
    if !(ps.usc_tol > 0.0 && ps.sweep_tol > 0.0) {
        return Err(err(src, "probe_settings", "probe tolerances must be positive"));
    }
    let output_dir = overrides_out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("qplap-out"));
    Ok(Resolved { config, grid, rho_bar, b, rho_expr, b_expr, q, alpha, p, output_dir })
}
