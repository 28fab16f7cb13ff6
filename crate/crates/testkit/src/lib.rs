//! Independent oracles for the qplap test suites.
//!
//! Nothing here shares code with `qplap-core`: every oracle rebuilds its own
//! 1D uniform-grid discretization so agreement is a genuine cross-check.

pub mod direct;
pub mod optimize;
pub mod penalty;
pub mod shooting;
pub mod spectral;

/// `a` and `b` agree to `rel` relative to `max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    assert_eq!(h.len(), err.len());
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
