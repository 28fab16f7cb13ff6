//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::panic;
use std::path::Path;
use std::time::Instant;

use qplap_cli::Command;
use qplap_core::oracles::{concavity_probe, picone_refinement_probe, stability_sweep, Sweep};
use qplap_core::*;
use qplap_testkit::{observed_order, penalty, shooting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Verdict { pass: true, detail: String::new() }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        let _ = write!(self.detail, "{}{}", what.as_ref(), if ok { "" } else { " [FAILED]" });
    }
}

fn unit(n: usize) -> (Grid, CellField, NodalField) {
    let g = Grid::interval(0.0, 1.0, n).unwrap();
    let rho = CellField::constant(&g, 1.0);
    let b = NodalField::constant(&g, 1.0);
    (g, rho, b)
}

fn log_uniform(rng: &mut ChaCha8Rng, n: usize) -> CellField {
    CellField::new((0..n).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect())
}

fn eigenvalue_accuracy() -> Verdict {
    let mut v = Verdict::new();
    let cfg = EigSolverConfig::default();
    let ns = [32usize, 64, 128, 256];
    let mut errs = Vec::new();
    let mut slowest: f64 = 0.0;
    for &n in &ns {
        let (g, rho, b) = unit(n);
        let t = Instant::now();
        let lam = principal_eigenpair(&g, &rho, &b, 2.0, &cfg).unwrap().lambda1;
        slowest = slowest.max(t.elapsed().as_secs_f64());
        errs.push((lam - PI * PI).abs() / (PI * PI));
    }
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let order = observed_order(&hs, &errs);
    v.check(errs[3] < 1e-3, format!("1D rel err at N=256 {:.3e} < 1e-3", errs[3]));
    v.check(order >= 1.9, format!("order {order:.3} >= 1.9"));
    v.check(slowest < 5.0, format!("slowest 1D solve {slowest:.3}s < 5s"));
    let g = Grid::rectangle(1.0, 1.0, 64, 64).unwrap();
    let t = Instant::now();
    let lam = principal_eigenpair(&g, &CellField::constant(&g, 1.0), &NodalField::constant(&g, 1.0), 2.0, &cfg)
        .unwrap()
        .lambda1;
    let secs = t.elapsed().as_secs_f64();
    let rel = (lam - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    v.check(rel < 0.01, format!("2D 64x64 lambda1 {lam:.6} rel err {rel:.3e} < 1e-2"));
    v.check(secs < 5.0, format!("2D solve {secs:.3}s < 5s"));
    v
}

fn cubic_cross_validation() -> Verdict {
    let mut v = Verdict::new();
    let (g, rho, b) = unit(256);
    let t = Instant::now();
    let lam = principal_eigenpair(&g, &rho, &b, 3.0, &EigSolverConfig::default()).unwrap().lambda1;
    let secs = t.elapsed().as_secs_f64();
    let shot = shooting::principal_eigenvalue(3.0, 1.0, 1.0, 200_000);
    let rel = (lam - shot).abs() / shot;
    v.check(rel < 5e-3, format!("q=3 lambda1 {lam:.6} vs shooting {shot:.6}, rel {rel:.3e} < 5e-3"));
    v.check(secs < 30.0, format!("solve {secs:.3}s < 30s"));
    v
}

fn derivative_formula() -> Verdict {
    let mut v = Verdict::new();
    let n = 64;
    let (g, _, b) = unit(n);
    let cfg = EigSolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (q, tol) in [(2.0, 1e-4), (3.0, 1e-3)] {
        let mut worst: f64 = 0.0;
        let mut worst_identity: f64 = 0.0;
        for _ in 0..20 {
            let rho = log_uniform(&mut rng, n);
            let h = CellField::new((0..n).map(|_| rng.gen_range(0.0..1.0)).collect());
            let pair = principal_eigenpair(&g, &rho, &b, q, &cfg).unwrap();
            let exact = eigenvalue_derivative(&g, &pair, &b, q, &h).unwrap();
            let best = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
                .iter()
                .map(|&e| {
                    let lp = principal_eigenpair(&g, &rho.add(&h.scaled(e)), &b, q, &cfg).unwrap().lambda1;
                    let lm = principal_eigenpair(&g, &rho.add(&h.scaled(-e)), &b, q, &cfg).unwrap().lambda1;
                    ((lp - lm) / (2.0 * e) - exact).abs() / exact.abs()
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
            let along = eigenvalue_derivative(&g, &pair, &b, q, &rho).unwrap();
            worst_identity = worst_identity.max((along - pair.lambda1).abs() / pair.lambda1);
        }
        v.check(worst < tol, format!("q={q}: worst FD rel err {worst:.3e} < {tol:e}"));
        v.check(worst_identity < 1e-8, format!("q={q}: h=rho identity {worst_identity:.3e} < 1e-8"));
    }
    v
}

fn concavity() -> Verdict {
    let mut v = Verdict::new();
    let (g, _, b) = unit(64);
    let cfg = EigSolverConfig::default();
    let t_grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let t = Instant::now();
    for q in [2.0, 3.0] {
        let rep = concavity_probe(&g, &b, q, 50, &t_grid, 4, &cfg).unwrap();
        v.check(
            rep.pass && rep.failures == 0 && rep.samples == 50,
            format!("q={q}: worst violation {:.3e} <= {:.3e}", rep.worst_violation, rep.tolerance),
        );
    }
    let secs = t.elapsed().as_secs_f64();
    v.check(secs < 120.0, format!("runtime {secs:.1}s < 120s"));
    v
}

fn demo_solution() -> (Grid, CellField, NodalField, InverseSolution) {
    let (g, rho_bar, b) = unit(128);
    let sol =
        solve_inverse(&g, &rho_bar, &b, 2.0 * PI * PI, 2.0, &InverseConfig::default(), &EigSolverConfig::default())
            .unwrap();
    (g, rho_bar, b, sol)
}

fn inverse_correctness() -> Verdict {
    let mut v = Verdict::new();
    let (g, rho_bar, b, sol) = demo_solution();
    let lam = 2.0 * PI * PI;
    v.check(sol.status == InverseStatus::Solved, format!("status {:?}", sol.status));
    let lam_hat = rayleigh_quotient(&g, &sol.rho_hat, &b, &sol.eigenpair_at_rho_hat.phi1, 2.0).unwrap();
    let fresh = principal_eigenpair(&g, &sol.rho_hat, &b, 2.0, &EigSolverConfig::default()).unwrap().lambda1;
    let rel = (lam_hat - lam).abs().max((fresh - lam).abs()) / lam;
    v.check(rel < 1e-6, format!("lambda1(rho_hat) rel err {rel:.3e} < 1e-6"));
    let sign_min = sol.rho_hat.sub(&rho_bar).min();
    v.check(sign_min >= -1e-12, format!("min(rho_hat - rho_bar) {sign_min:.3e} >= -1e-12"));
    let kkt = kkt_report(&g, &sol, &rho_bar, &b, 2.0, 2.0).unwrap();
    v.check(kkt.stationarity < 1e-4, format!("KKT stationarity {:.3e} < 1e-4", kkt.stationarity));
    let pq = construct_solution(&g, &sol, &rho_bar, &b, 2.0, 2.0).unwrap();
    let grads = g.cell_gradient(&pq.u_hat).unwrap();
    let top = sol.rho_hat.max();
    let worst = sol
        .rho_hat
        .iter()
        .zip(rho_bar.iter())
        .zip(grads.magnitudes.iter())
        .map(|((r, rb), m)| ((r - rb) - m.powi(2)).abs())
        .fold(0.0, f64::max);
    v.check(worst < 1e-8 * top, format!("cellwise identity {worst:.3e} < 1e-8 max rho_hat ({:.3e})", 1e-8 * top));

    let (gc, rbc, bc) = unit(16);
    let coarse = solve_inverse(&gc, &rbc, &bc, lam, 2.0, &InverseConfig::default(), &EigSolverConfig::default()).unwrap();
    let brute = penalty::solve(&rbc, &bc, lam, 2.0, 3, 99);
    let dev = coarse.rho_hat.iter().zip(&brute.rho).map(|(a, e)| (a - e).abs() / e).fold(0.0, f64::max);
    v.check(dev < 0.01, format!("N=16 max per-cell deviation from penalty oracle {dev:.3e} < 1e-2"));
    v
}

fn pq_certificate() -> Verdict {
    let mut v = Verdict::new();
    let (g, rho_bar, b, sol) = demo_solution();
    let lam = 2.0 * PI * PI;
    let pq = construct_solution(&g, &sol, &rho_bar, &b, 2.0, 2.0).unwrap();
    v.check(pq.residual_max < 1e-6, format!("normalized weak residual {:.3e} < 1e-6", pq.residual_max));
    let rel = (pq.rayleigh_identity() - lam).abs() / lam;
    v.check(rel < 1e-6, format!("Rayleigh identity rel err {rel:.3e} < 1e-6"));
    v.check(pq.u_hat.iter().all(|&x| x >= 0.0), "u_hat nonnegative");
    v
}

fn existence_and_uniqueness() -> Verdict {
    let mut v = Verdict::new();
    let (g, rho_bar, b) = unit(128);
    let (cfg, eig_cfg) = (InverseConfig::default(), EigSolverConfig::default());
    let low = existence_verdict(&g, &rho_bar, &b, 2.0, PI * PI / 2.0, &eig_cfg).unwrap();
    v.check(low.existence == Existence::NoSolution, format!("lambda=pi^2/2: {:?}", low.existence));
    let lam = 2.0 * PI * PI;
    let high = existence_verdict(&g, &rho_bar, &b, 2.0, lam, &eig_cfg).unwrap();
    v.check(high.existence == Existence::UniqueSolution, format!("lambda=2pi^2: {:?}", high.existence));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut fields: Vec<NodalField> = Vec::new();
    for _ in 0..5 {
        let init = CellField::new((0..128).map(|_| 10f64.powf(rng.gen_range(-0.5..0.7))).collect());
        let sol = solve_inverse_from(&g, &rho_bar, &b, lam, 2.0, &cfg, &eig_cfg, Some(&init)).unwrap();
        if sol.status != InverseStatus::Solved {
            v.check(false, format!("random start ended {:?}", sol.status));
            return v;
        }
        fields.push(construct_solution(&g, &sol, &rho_bar, &b, 2.0, 2.0).unwrap().u_hat);
    }
    let mut spread: f64 = 0.0;
    for f in &fields[1..] {
        for (a, e) in f.iter().zip(fields[0].iter()) {
            spread = spread.max((a - e).abs());
        }
    }
    let tol = 10.0 * cfg.tol_fixed_point;
    v.check(spread < tol, format!("5 random starts: max nodal spread {spread:.3e} < {tol:e}"));
    v
}

fn stability() -> Verdict {
    let mut v = Verdict::new();
    let (g, rho_bar, b) = unit(128);
    let (cfg, eig_cfg) = (InverseConfig::default(), EigSolverConfig::default());
    let steps = |base: f64| (1..=8).map(move |n| base * (1.0 + 0.5f64.powi(n))).collect::<Vec<f64>>();

    let sweep = Sweep::Lambda { rho_bar: rho_bar.clone(), lambdas: steps(2.0 * PI * PI) };
    let rep = stability_sweep(&g, &b, 2.0, &sweep, &cfg, &eig_cfg, 1e-4).unwrap();
    let diffs: Vec<f64> = rep.records.iter().map(|r| r.values["rho_hat_diff"]).collect();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    v.check(decreasing && rep.failures == 0, format!("lambda sweep differences strictly decreasing {}", fmt_list(&diffs)));
    v.check(rep.summary["last_difference"] < 1e-4, format!("lambda sweep final difference {:.3e} < 1e-4", rep.summary["last_difference"]));

    let l1 = principal_eigenpair(&g, &rho_bar, &b, 2.0, &eig_cfg).unwrap().lambda1;
    let mut distances = Vec::new();
    for lam in steps(l1) {
        distances.push(solve_inverse(&g, &rho_bar, &b, lam, 2.0, &cfg, &eig_cfg).unwrap().distance);
    }
    let shrinking = distances.windows(2).all(|w| w[1] < w[0]);
    v.check(shrinking, format!("endpoint sweep distances decreasing {}", fmt_list(&distances)));
    v.check(distances[7] < 1e-3, format!("endpoint distance at n=8 {:.3e} < 1e-3", distances[7]));

    let priors: Vec<CellField> = (1..=8)
        .map(|n| CellField::from_fn(&g, |x| 1.0 + 0.5f64.powi(n) * (PI * x[0]).sin()))
        .collect();
    let rep = stability_sweep(&g, &b, 2.0, &Sweep::Prior { lambda: 2.0 * PI * PI, priors }, &cfg, &eig_cfg, 1e-4).unwrap();
    let diffs: Vec<f64> = rep.records.iter().map(|r| r.values["rho_hat_diff"]).collect();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    v.check(decreasing && rep.failures == 0, format!("prior sweep differences strictly decreasing {}", fmt_list(&diffs)));
    v.check(rep.summary["last_difference"] < 1e-4, format!("prior sweep final difference {:.3e} < 1e-4", rep.summary["last_difference"]));
    v
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn picone() -> Verdict {
    let mut v = Verdict::new();
    let grids: Vec<Grid> = [16, 32, 64, 128].iter().map(|&n| Grid::interval(0.0, 1.0, n).unwrap()).collect();
    for q in [2.0, 3.0] {
        let rep = picone_refinement_probe(&grids, q, 1e-3, 30, 8).unwrap();
        let neg = rep.records.iter().map(|r| r.values["neg_l"]).fold(f64::NEG_INFINITY, f64::max);
        v.check(rep.failures == 0 && rep.samples == 30, format!("q={q}: 30 samples evaluated"));
        v.check(neg <= 1e-8, format!("q={q}: max -int rho L / scale {neg:.3e} <= 1e-8"));
        v.check(rep.pass, format!("q={q}: gap decreases monotonically, min observed order {:.3}", rep.summary["min_order"]));
    }
    v
}

const RUN_CONFIG: &str = r#"{
  "domain": {"interval": {"a": 0, "b": 1, "cells": 64}},
  "q": 2,
  "alpha": 2,
  "b": "1 + 0.25*sin(pi*x)",
  "rho_bar": "1 + 0.5*x",
  "lambda_target": 30,
  "svg": true,
  "probes": ["concavity", "picone", "semicontinuity", "stability"],
  "probe_settings": {"samples": 8, "picone_samples": 6}
}"#;

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(f).unwrap())).collect()
}

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, RUN_CONFIG).unwrap();
    let mut snaps = Vec::new();
    let mut codes = Vec::new();
    for (k, threads) in [1usize, 3, 1].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let run: Vec<i32> = pool.install(|| {
            [Command::Eig, Command::Inverse, Command::SolvePq, Command::Probe]
                .into_iter()
                .map(|cmd| qplap_cli::run_file(cmd, &cfg, Some(11), Some(out.clone())).unwrap().exit_code)
                .collect()
        });
        codes.push(run);
        snaps.push(snapshot(&out));
    }
    let n = snaps[0].len();
    v.check(n == 13, format!("{n} artifacts per run"));
    v.check(codes[0] == codes[1] && codes[0] == codes[2], format!("exit codes {:?} identical across runs", codes[0]));
    v.check(snaps[0] == snaps[2], "repeated run byte-identical");
    v.check(snaps[0] == snaps[1], "1 vs 3 worker threads byte-identical");
    v
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "eigenvalue accuracy", eigenvalue_accuracy),
        (2, "q>2 cross-validation", cubic_cross_validation),
        (3, "derivative formula", derivative_formula),
        (4, "concavity", concavity),
        (5, "inverse solve correctness", inverse_correctness),
        (6, "(p,q) solution certificate", pq_certificate),
        (7, "nonexistence and uniqueness", existence_and_uniqueness),
        (8, "stability", stability),
        (9, "Picone oracle", picone),
        (10, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        let t = Instant::now();
        let verdict = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict { pass: false, detail: format!("panicked: {msg}") }
        });
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name} ({:.1}s): {}", t.elapsed().as_secs_f64(), verdict.detail);
        if !verdict.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
