//! Shooting method for the 1D Dirichlet q-Laplacian eigenvalue
//! `-(rho |u'|^(q-2) u')' = lambda |u|^(q-2) u` on `(0, len)` with constant `rho`.
//!
//! Writing `v = |u'|^(q-2) u'` gives the first-order system
//! `u' = |v|^(1/(q-1)) sgn v`, `v' = -(lambda/rho) |u|^(q-2) u`, integrated
//! with RK4 from `u(0) = 0, v(0) = 1`. The first zero of `u` moves left as
//! `lambda` grows; bisection places it at `len`.

fn phi(x: f64, r: f64) -> f64 {
    x.signum() * x.abs().powf(r)
}

/// First positive zero of `u`, or `None` if it does not occur before `x_max`.
pub fn first_zero(lambda: f64, q: f64, rho: f64, x_max: f64, steps: usize) -> Option<f64> {
    let h = x_max / steps as f64;
    let inv = 1.0 / (q - 1.0);
    let f = |u: f64, v: f64| (phi(v, inv), -(lambda / rho) * phi(u, q - 1.0));
    let (mut u, mut v) = (0.0, 1.0);
    for i in 0..steps {
        let (k1u, k1v) = f(u, v);
        let (k2u, k2v) = f(u + 0.5 * h * k1u, v + 0.5 * h * k1v);
        let (k3u, k3v) = f(u + 0.5 * h * k2u, v + 0.5 * h * k2v);
        let (k4u, k4v) = f(u + h * k3u, v + h * k3v);
        let un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if i > 0 && un <= 0.0 {
            // linear interpolation inside the last step
            return Some(i as f64 * h + h * u / (u - un));
        }
        u = un;
        v = vn;
    }
    None
}

/// Principal eigenvalue on `(0, len)` by bisection on the first zero.
pub fn principal_eigenvalue(q: f64, rho: f64, len: f64, steps: usize) -> f64 {
    let x_max = 4.0 * len;
    let zero = |lam: f64| first_zero(lam, q, rho, x_max, steps).unwrap_or(f64::INFINITY);
    let mut lo = 1e-3;
    let mut hi = 1.0;
    while zero(hi) > len {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zero(mid) > len {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `(q - 1) pi_q^q` with `pi_q = 2 pi / (q sin(pi / q))`: the eigenvalue on
/// the unit interval for `rho = 1`.
pub fn closed_form_unit(q: f64) -> f64 {
    let pq = 2.0 * std::f64::consts::PI / (q * (std::f64::consts::PI / q).sin());
    (q - 1.0) * pq.powf(q)
}
