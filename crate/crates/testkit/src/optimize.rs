//! Plain BFGS with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Central finite-difference gradient with step `h * max(1, |x_i|)`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let s = h * x[i].abs().max(1.0);
            y[i] = x[i] + s;
            let fp = f(&y);
            y[i] = x[i] - s;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * s)
        })
        .collect()
}

pub fn bfgs(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    gtol: f64,
    max_iter: usize,
) -> Minimum {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut it = 0;
    while it < max_iter && g.amax() > gtol {
        it += 1;
        let mut d = -(&hinv * &g);
        if d.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = -g.clone();
        }
        let slope = d.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + t * &d;
            let fnew = f(xn.as_slice());
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let stalled = (fx - fnew).abs() <= 1e-15 * fx.abs().max(1e-300);
        let gn = DVector::from_vec(grad(xn.as_slice()));
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - rho * &s * y.transpose();
            let b = &i - rho * &y * s.transpose();
            hinv = &a * &hinv * &b + rho * &s * s.transpose();
        }
        x = xn;
        fx = fnew;
        g = gn;
        if stalled {
            break;
        }
    }
    Minimum { x: x.as_slice().to_vec(), value: fx, iterations: it, grad_norm: g.amax() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| fd_gradient(&f, x, 1e-6);
        let m = bfgs(&f, &g, &[-1.2, 1.0], 1e-7, 500);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }
}
