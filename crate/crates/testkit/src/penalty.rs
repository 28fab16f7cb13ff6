//! Brute-force inverse optimal density for `q = 2` on a uniform 1D grid:
//! minimize `h sum |rho - rho_bar|^alpha + K max(0, lambda - lambda1(rho))^2`
//! with finite-difference BFGS, continuing `K` over `1e1 ..= 1e6` and keeping
//! the best of several random starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::optimize::{bfgs, fd_gradient};
use crate::spectral::principal_eigenvalue;

#[derive(Debug, Clone)]
pub struct PenaltyResult {
    pub rho: Vec<f64>,
    pub objective: f64,
    pub lambda1: f64,
}

pub fn solve(rho_bar: &[f64], b: &[f64], lambda: f64, alpha: f64, restarts: usize, seed: u64) -> PenaltyResult {
    let h = 1.0 / rho_bar.len() as f64;
    let dist = |x: &[f64]| h * x.iter().zip(rho_bar).map(|(r, rb)| (r - rb).abs().powf(alpha)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<PenaltyResult> = None;
    for _ in 0..restarts.max(1) {
        let mut x: Vec<f64> = rho_bar.iter().map(|r| r * (1.0 + rng.gen_range(0.0..2.0))).collect();
        for k in 1..=6 {
            let weight = 10f64.powi(k);
            let f = |y: &[f64]| {
                if y.iter().any(|&v| v <= 0.0) {
                    return f64::INFINITY;
                }
                let gap = (lambda - principal_eigenvalue(y, b, 1.0)).max(0.0);
                dist(y) + weight * gap * gap
            };
            let g = |y: &[f64]| fd_gradient(&f, y, 1e-7);
            x = bfgs(&f, &g, &x, 1e-10, 2000).x;
        }
        let lam1 = principal_eigenvalue(&x, b, 1.0);
        let cand = PenaltyResult { objective: dist(&x), lambda1: lam1, rho: x };
        if best.as_ref().is_none_or(|bst| cand.objective < bst.objective) {
            best = Some(cand);
        }
    }
    best.expect("at least one restart")
}
