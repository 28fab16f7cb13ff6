//! Property probes for the structural facts the solvers rely on: concavity
//! and upper semicontinuity of the principal eigenvalue in the density, the
//! Picone inequality, and continuous dependence of the inverse solution on
//! its data. Every probe is deterministic for a given seed; samples run in
//! parallel and are merged in sample order.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{p_energy, q_energy};
use crate::eigen::{principal_eigenpair, EigSolverConfig};
use crate::error::{check_len, check_q, Error, Result};
use crate::grid::{CellField, Dim, Grid, NodalField};
use crate::inverse::{solve_inverse, InverseConfig, InverseStatus};
use crate::pq::construct_solution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub index: usize,
    /// FNV-1a hash of the sample's input data.
    pub input_hash: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub name: String,
    pub seed: u64,
    pub samples: usize,
    /// Samples whose solver calls failed.
    pub failures: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub summary: BTreeMap<String, f64>,
    pub records: Vec<ProbeRecord>,
}

impl ProbeReport {
    fn new(name: &str, seed: u64, records: Vec<ProbeRecord>, failures: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            seed,
            samples: records.len() + failures,
            failures,
            worst_violation: worst,
            tolerance,
            pass: worst <= tolerance,
            summary: BTreeMap::new(),
            records,
        }
    }
}

pub fn hash_inputs(data: &[&[f64]]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for slice in data {
        for v in slice.iter() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Cellwise log-uniform density in `[lo, hi]`.
pub fn random_density(grid: &Grid, rng: &mut impl Rng, lo: f64, hi: f64) -> CellField {
    let (a, b) = (lo.ln(), hi.ln());
    CellField::new((0..grid.cell_count()).map(|_| rng.gen_range(a..=b).exp()).collect())
}

fn record(index: usize, inputs: &[&[f64]], values: &[(&str, f64)]) -> ProbeRecord {
    ProbeRecord {
        index,
        input_hash: hash_inputs(inputs),
        values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

/// Largest signed violation `t l1 + (1-t) l2 - lambda1(t rho1 + (1-t) rho2)`
/// over `t_grid`, together with the largest eigenvalue seen.
pub fn concavity_check(
    grid: &Grid,
    b: &NodalField,
    q: f64,
    rho1: &CellField,
    rho2: &CellField,
    t_grid: &[f64],
    cfg: &EigSolverConfig,
) -> Result<(f64, f64)> {
    let l1 = principal_eigenpair(grid, rho1, b, q, cfg)?.lambda1;
    let l2 = principal_eigenpair(grid, rho2, b, q, cfg)?.lambda1;
    let mut worst = f64::NEG_INFINITY;
    let mut max_lambda = l1.max(l2);
    for &t in t_grid {
        let mix = CellField::new(rho1.iter().zip(rho2.iter()).map(|(a, b)| t * a + (1.0 - t) * b).collect());
        let lt = principal_eigenpair(grid, &mix, b, q, cfg)?.lambda1;
        max_lambda = max_lambda.max(lt);
        worst = worst.max(t * l1 + (1.0 - t) * l2 - lt);
    }
    Ok((worst, max_lambda))
}

/// Concavity of `lambda1` along segments between random log-uniform densities
/// in `[0.1, 10]`. Tolerance: `2 * tol_lambda * max lambda1`.
pub fn concavity_probe(
    grid: &Grid,
    b: &NodalField,
    q: f64,
    samples: usize,
    t_grid: &[f64],
    seed: u64,
    cfg: &EigSolverConfig,
) -> Result<ProbeReport> {
    check_q(q)?;
    if samples == 0 {
        return Err(Error::Parameter("concavity probe needs at least one sample".into()));
    }
    let results: Vec<Option<(ProbeRecord, f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let rho1 = random_density(grid, &mut rng, 0.1, 10.0);
            let rho2 = random_density(grid, &mut rng, 0.1, 10.0);
            let (worst, lmax) = concavity_check(grid, b, q, &rho1, &rho2, t_grid, cfg).ok()?;
            Some((record(i, &[&rho1, &rho2], &[("violation", worst), ("max_lambda1", lmax)]), worst, lmax))
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    let ok: Vec<_> = results.into_iter().flatten().collect();
    let worst = ok.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let lmax = ok.iter().map(|r| r.2).fold(0.0, f64::max);
    let worst = if ok.is_empty() { f64::INFINITY } else { worst };
    let tol = 2.0 * cfg.tol_lambda * lmax;
    let mut rep = ProbeReport::new("concavity", seed, ok.into_iter().map(|r| r.0).collect(), failures, worst, tol);
    rep.summary.insert("max_lambda1".into(), lmax);
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiconeIntegrals {
    /// `int rho L(phi, u + eps)`
    pub l: f64,
    /// `int rho R(phi, u + eps)`
    pub r: f64,
    /// `int rho |grad phi|^q`, a natural scale for both integrals.
    pub scale: f64,
}

/// Evaluates the two Picone integrands cellwise. `L` uses cell-averaged
/// ratios `phi/(u+eps)` with cell gradients; `R` uses the gradient of the
/// piecewise-linear interpolant of the nodal quotient `phi^q/(u+eps)^(q-1)`.
/// Both agree in the continuum, so their gap measures discretization error.
pub fn picone_probe(
    grid: &Grid,
    rho: &CellField,
    phi: &NodalField,
    u: &NodalField,
    eps: f64,
    q: f64,
) -> Result<PiconeIntegrals> {
    check_q(q)?;
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    check_len(grid.cell_count(), rho.len())?;
    check_len(grid.node_count(), phi.len())?;
    check_len(grid.node_count(), u.len())?;
    if phi.iter().chain(u.iter()).any(|&v| v < 0.0) {
        return Err(Error::Precondition("phi and u must be nonnegative".into()));
    }
    let quotient: Vec<f64> = phi.iter().zip(u.iter()).map(|(f, v)| f.powf(q) / (v + eps).powf(q - 1.0)).collect();
    let (mut l, mut r, mut scale) = (0.0, 0.0, 0.0);
    for (c, rc) in grid.cells().iter().zip(rho.iter()) {
        let gp = c.gradient(phi);
        let gu = c.gradient(u);
        let gq = c.gradient(&quotient);
        let np = gp[0].hypot(gp[1]);
        let nu = gu[0].hypot(gu[1]);
        let ratio = c.average(phi) / (c.average(u) + eps);
        let dot = gp[0] * gu[0] + gp[1] * gu[1];
        let wu = nu.powf(q - 2.0);
        let lc = np.powf(q) + (q - 1.0) * ratio.powf(q) * nu.powf(q) - q * ratio.powf(q - 1.0) * wu * dot;
        let rcell = np.powf(q) - wu * (gq[0] * gu[0] + gq[1] * gu[1]);
        l += rc * lc * c.measure();
        r += rc * rcell * c.measure();
        scale += rc * np.powf(q) * c.measure();
    }
    Ok(PiconeIntegrals { l, r, scale })
}

/// Smooth nonnegative field vanishing on the boundary of the bounding box:
/// `s(x) exp(sum_k a_k cos(k pi xi) + c_k cos(k pi eta))` with `s` the first
/// Dirichlet sine mode raised to `power`.
pub fn smooth_positive_field(grid: &Grid, coeffs: &[f64], power: f64) -> NodalField {
    let [[x0, y0], [x1, y1]] = grid.bounds();
    let two_d = grid.dim() == Dim::Two;
    let k = coeffs.len() / 2;
    NodalField::dirichlet_from_fn(grid, |p| {
        let xi = (p[0] - x0) / (x1 - x0);
        let mut s = (PI * xi).sin().max(0.0);
        let mut e = 0.0;
        for j in 0..k {
            e += coeffs[j] * ((j + 1) as f64 * PI * xi).cos();
        }
        if two_d {
            let eta = (p[1] - y0) / (y1 - y0);
            s *= (PI * eta).sin().max(0.0);
            for j in 0..k {
                e += coeffs[k + j] * ((j + 1) as f64 * PI * eta).cos();
            }
        }
        s.powf(power) * e.exp()
    })
}

/// Lowest observed convergence order the refinement study accepts.
pub const PICONE_MIN_ORDER: f64 = 0.8;

/// Picone study over a refinement sequence `grids` (coarse to fine), with
/// random smooth nonnegative pairs `(phi, u)` and unit density. `phi`
/// vanishes quadratically at the boundary and `u` linearly. When both vanish
/// linearly the ratio `phi/(u+eps)` has a boundary layer of width
/// `~eps/|grad u|`, and the gap stalls at `O(eps)` until `h << eps`.
///
/// Per sample the violation is the larger of `-int rho L / scale` on every
/// grid, and a refinement defect: `PICONE_MIN_ORDER - order` when the gap
/// `|int rho L - int rho R| / scale` fails to decrease strictly or converges
/// slower than that order (0 otherwise). Tolerance is `1e-8`.
pub fn picone_refinement_probe(grids: &[Grid], q: f64, eps: f64, samples: usize, seed: u64) -> Result<ProbeReport> {
    check_q(q)?;
    if grids.len() < 2 || samples == 0 {
        return Err(Error::Parameter("Picone study needs >= 2 grids and >= 1 sample".into()));
    }
    let sizes: Vec<f64> = grids
        .iter()
        .map(|g| {
            let d = if g.dim() == Dim::One { 1.0 } else { 2.0 };
            g.cells().iter().map(|c| c.measure()).fold(0.0, f64::max).powf(1.0 / d)
        })
        .collect();
    let results: Vec<Result<(ProbeRecord, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let cp: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let cu: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut gaps = Vec::with_capacity(grids.len());
            let mut neg: f64 = 0.0;
            let mut vals = Vec::new();
            for (gi, g) in grids.iter().enumerate() {
                let rho = CellField::constant(g, 1.0);
                let phi = smooth_positive_field(g, &cp, 2.0);
                let u = smooth_positive_field(g, &cu, 1.0);
                let pc = picone_probe(g, &rho, &phi, &u, eps, q)?;
                neg = neg.max(-pc.l / pc.scale);
                gaps.push((pc.l - pc.r).abs() / pc.scale);
                vals.push((format!("l_{gi}"), pc.l));
                vals.push((format!("gap_{gi}"), gaps[gi]));
            }
            let n = gaps.len();
            let order = (gaps[0] / gaps[n - 1]).ln() / (sizes[0] / sizes[n - 1]).ln();
            let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
            let defect = if monotone && order >= PICONE_MIN_ORDER { 0.0 } else { (PICONE_MIN_ORDER - order).max(1.0) };
            let violation = neg.max(defect);
            let mut rec = record(i, &[&cp, &cu], &[("order", order), ("neg_l", neg), ("violation", violation)]);
            rec.values.extend(vals);
            Ok((rec, violation))
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut min_order = f64::INFINITY;
    for r in results {
        match r {
            Ok((rec, v)) => {
                worst = worst.max(v);
                min_order = min_order.min(rec.values["order"]);
                records.push(rec);
            }
            Err(_) => failures += 1,
        }
    }
    if records.is_empty() {
        worst = f64::INFINITY;
    }
    let mut rep = ProbeReport::new(&format!("picone_q{q}"), seed, records, failures, worst, 1e-8);
    rep.summary.insert("min_order".into(), min_order);
    Ok(rep)
}

/// One term of a sequence `rho_n -> rho` for the semicontinuity probe.
#[derive(Debug, Clone)]
pub struct UscStep {
    pub grid: Grid,
    pub b: NodalField,
    /// Limit density represented on this step's grid.
    pub rho_limit: CellField,
    pub rho_n: CellField,
    /// Perturbation size, tending to 0 along the sequence.
    pub size: f64,
}

/// Checks `limsup lambda1(rho_n) <= lambda1(rho) + tol`. The relative excess
/// `e_n = (lambda1(rho_n) - lambda1(rho)) / lambda1(rho)` is extrapolated
/// linearly in `size` to `size = 0` from the last two terms; that estimate is
/// the reported violation.
pub fn usc_probe(steps: &[UscStep], q: f64, tol: f64, cfg: &EigSolverConfig) -> Result<ProbeReport> {
    check_q(q)?;
    if steps.is_empty() {
        return Err(Error::Parameter("semicontinuity probe needs a nonempty sequence".into()));
    }
    let results: Vec<Result<(f64, f64)>> = steps
        .par_iter()
        .map(|s| {
            let ln = principal_eigenpair(&s.grid, &s.rho_n, &s.b, q, cfg)?.lambda1;
            let l = principal_eigenpair(&s.grid, &s.rho_limit, &s.b, q, cfg)?.lambda1;
            Ok((ln, l))
        })
        .collect();
    let mut records = Vec::new();
    let mut excess = Vec::new();
    let mut failures = 0;
    for (i, (s, r)) in steps.iter().zip(results).enumerate() {
        match r {
            Ok((ln, l)) => {
                let e = (ln - l) / l;
                excess.push((s.size, e));
                records.push(record(
                    i,
                    &[&s.rho_n, &s.rho_limit],
                    &[("lambda1_n", ln), ("lambda1_limit", l), ("excess", e), ("size", s.size)],
                ));
            }
            Err(_) => failures += 1,
        }
    }
    let limsup = match excess.len() {
        0 => f64::INFINITY,
        1 => excess[0].1,
        n => {
            let (s1, e1) = excess[n - 2];
            let (s2, e2) = excess[n - 1];
            if s1 == s2 { e2 } else { e2 - s2 * (e2 - e1) / (s2 - s1) }
        }
    };
    let mut rep = ProbeReport::new("semicontinuity", 0, records, failures, limsup, tol);
    rep.summary.insert("limsup_estimate".into(), limsup);
    if let Some(&(_, e)) = excess.last() {
        rep.summary.insert("last_excess".into(), e);
    }
    Ok(rep)
}

/// Input sequence of a stability sweep.
#[derive(Debug, Clone)]
pub enum Sweep {
    /// Fixed prior, varying target eigenvalue.
    Lambda { rho_bar: CellField, lambdas: Vec<f64> },
    /// Fixed target eigenvalue, varying prior.
    Prior { lambda: f64, priors: Vec<CellField> },
}

/// Solves the inverse problem along a convergent input sequence and records
/// successive differences of `rho_hat` (discrete `L^alpha`), of `u_hat`
/// (`(int |grad du|^q + int |du|^q)^(1/q)`) and of `||grad u_hat||_p`.
///
/// Passes when the nonzero `rho_hat` differences strictly decrease and the
/// last one is at most `tol`; the violation is that last difference, or
/// infinity when monotonicity fails.
pub fn stability_sweep(
    grid: &Grid,
    b: &NodalField,
    q: f64,
    sweep: &Sweep,
    cfg: &InverseConfig,
    eig_cfg: &EigSolverConfig,
    tol: f64,
) -> Result<ProbeReport> {
    check_q(q)?;
    let inputs: Vec<(CellField, f64)> = match sweep {
        Sweep::Lambda { rho_bar, lambdas } => lambdas.iter().map(|&l| (rho_bar.clone(), l)).collect(),
        Sweep::Prior { lambda, priors } => priors.iter().map(|p| (p.clone(), *lambda)).collect(),
    };
    if inputs.len() < 2 {
        return Err(Error::Parameter("stability sweep needs at least two inputs".into()));
    }
    let p = cfg.p(q);
    let solved: Vec<Result<(CellField, NodalField, f64)>> = inputs
        .par_iter()
        .map(|(rho_bar, lambda)| {
            let sol = solve_inverse(grid, rho_bar, b, *lambda, q, cfg, eig_cfg)?;
            let u = match sol.status {
                InverseStatus::Solved => construct_solution(grid, &sol, rho_bar, b, q, cfg.alpha)?.u_hat,
                InverseStatus::PriorAlreadyFeasible => NodalField::zeros(grid),
                InverseStatus::NotConverged => return Err(Error::Precondition("inverse solve did not converge".into())),
            };
            Ok((sol.rho_hat, u, sol.distance))
        })
        .collect();
    let mut failures = 0;
    let mut states = Vec::new();
    for r in solved {
        match r {
            Ok(s) => states.push(s),
            Err(_) => failures += 1,
        }
    }
    let one = CellField::constant(grid, 1.0);
    let mut records = Vec::new();
    let mut diffs = Vec::new();
    for (i, w) in states.windows(2).enumerate() {
        let (r0, u0, _) = &w[0];
        let (r1, u1, d1) = &w[1];
        let dr = grid.cell_norm(&r1.sub(r0), cfg.alpha)?;
        let du = u1.sub(u0);
        let du_norm = (q_energy(grid, &one, &du, q)? + grid.nodal_norm(&du, q)?.powf(q)).powf(1.0 / q);
        let dp = (p_energy(grid, u1, p)?.powf(1.0 / p) - p_energy(grid, u0, p)?.powf(1.0 / p)).abs();
        diffs.push(dr);
        records.push(record(
            i,
            &[r0, r1],
            &[("rho_hat_diff", dr), ("u_hat_diff", du_norm), ("grad_p_norm_diff", dp), ("distance", *d1)],
        ));
    }
    let monotone = diffs.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    let last = diffs.last().copied().unwrap_or(f64::INFINITY);
    let worst = if monotone && failures == 0 { last } else { f64::INFINITY };
    let name = match sweep {
        Sweep::Lambda { .. } => "stability_lambda",
        Sweep::Prior { .. } => "stability_prior",
    };
    let mut rep = ProbeReport::new(name, 0, records, failures, worst, tol);
    rep.summary.insert("last_difference".into(), last);
    if let Some((_, _, d)) = states.last() {
        rep.summary.insert("last_distance".into(), *d);
    }
    if let Some((_, _, d)) = states.first() {
        rep.summary.insert("first_distance".into(), *d);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::interval(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn concavity_is_equality_for_identical_densities_and_endpoints() {
        let g = unit(32);
        let b = NodalField::constant(&g, 1.0);
        let cfg = EigSolverConfig::default();
        let rho = CellField::from_fn(&g, |p| 1.0 + p[0]);
        let (w, _) = concavity_check(&g, &b, 2.0, &rho, &rho, &[0.3, 0.7], &cfg).unwrap();
        assert!(w.abs() < 1e-12 * 20.0);
        let other = CellField::from_fn(&g, |p| 2.0 - p[0] * p[0]);
        let (w, _) = concavity_check(&g, &b, 2.0, &rho, &other, &[0.0, 1.0], &cfg).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn concavity_probe_passes_and_is_deterministic() {
        let g = unit(32);
        let b = NodalField::constant(&g, 1.0);
        let cfg = EigSolverConfig::default();
        let ts: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let a = concavity_probe(&g, &b, 2.0, 4, &ts, 7, &cfg).unwrap();
        let b2 = concavity_probe(&g, &b, 2.0, 4, &ts, 7, &cfg).unwrap();
        assert!(a.pass, "{a:?}");
        assert_eq!(a, b2);
        assert!(concavity_probe(&g, &b, 2.0, 0, &ts, 7, &cfg).is_err());
    }

    #[test]
    fn picone_trivial_cases() {
        let g = unit(64);
        let rho = CellField::constant(&g, 1.0);
        let u = smooth_positive_field(&g, &[0.2, -0.1, 0.3, 0.0, 0.0, 0.0], 1.0);
        let zero = NodalField::zeros(&g);
        for q in [2.0, 3.0] {
            let pc = picone_probe(&g, &rho, &zero, &u, 1e-3, q).unwrap();
            assert_eq!((pc.l, pc.r), (0.0, 0.0));
            let same = picone_probe(&g, &rho, &u, &u, 1e-3, q).unwrap();
            assert!(same.l >= 0.0);
            assert!((same.l - same.r).abs() < 0.05 * same.scale);
        }
        assert!(picone_probe(&g, &rho, &u, &u, 0.0, 2.0).is_err());
        assert!(picone_probe(&g, &rho, &u.scaled(-1.0), &u, 1e-3, 2.0).is_err());
    }

    #[test]
    fn usc_constant_and_scaling_sequences() {
        let g = unit(32);
        let b = NodalField::constant(&g, 1.0);
        let rho = CellField::constant(&g, 1.0);
        let cfg = EigSolverConfig::default();
        let constant: Vec<UscStep> = (1..=3)
            .map(|_| UscStep { grid: g.clone(), b: b.clone(), rho_limit: rho.clone(), rho_n: rho.clone(), size: 0.0 })
            .collect();
        let rep = usc_probe(&constant, 2.0, 1e-10, &cfg).unwrap();
        assert!(rep.pass && rep.worst_violation == 0.0);
        let scaled: Vec<UscStep> = (1..=6)
            .map(|n| {
                let s = 1.0 / n as f64;
                UscStep { grid: g.clone(), b: b.clone(), rho_limit: rho.clone(), rho_n: rho.scaled(1.0 + s), size: s }
            })
            .collect();
        let rep = usc_probe(&scaled, 2.0, 1e-9, &cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
        let ex: Vec<f64> = rep.records.iter().map(|r| r.values["excess"]).collect();
        assert!(ex.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_sweep_has_zero_differences() {
        let g = unit(32);
        let b = NodalField::constant(&g, 1.0);
        let rho = CellField::constant(&g, 1.0);
        let sweep = Sweep::Lambda { rho_bar: rho, lambdas: vec![15.0; 3] };
        let rep =
            stability_sweep(&g, &b, 2.0, &sweep, &InverseConfig::default(), &EigSolverConfig::default(), 1e-12).unwrap();
        assert!(rep.pass);
        assert!(rep.records.iter().all(|r| r.values["rho_hat_diff"] == 0.0));
    }

    #[test]
    fn hashes_are_stable() {
        assert_eq!(hash_inputs(&[&[]]), "cbf29ce484222325");
        assert_ne!(hash_inputs(&[&[1.0]]), hash_inputs(&[&[2.0]]));
    }
}
