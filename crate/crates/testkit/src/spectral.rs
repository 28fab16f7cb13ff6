//! Dense generalized eigenproblem for P1 elements on a uniform 1D grid with
//! lumped mass, `q = 2`: `K u = lambda M u`.

use nalgebra::{DMatrix, SymmetricEigen};

/// Stiffness over interior nodes for cell densities `rho` on `(0, len)`.
pub fn stiffness(rho: &[f64], len: f64) -> DMatrix<f64> {
    let n = rho.len();
    let h = len / n as f64;
    let m = n - 1;
    let mut k = DMatrix::zeros(m, m);
    for (c, r) in rho.iter().enumerate() {
        // cell c joins nodes c and c+1; interior index is node - 1
        let w = r / h;
        let (a, b) = (c as isize - 1, c as isize);
        for (i, si) in [(a, 1.0), (b, -1.0)] {
            for (j, sj) in [(a, 1.0), (b, -1.0)] {
                if i >= 0 && j >= 0 && (i as usize) < m && (j as usize) < m {
                    k[(i as usize, j as usize)] += w * si * sj;
                }
            }
        }
    }
    k
}

/// Lumped mass diagonal `h b_i` over interior nodes; `b` holds all nodes.
pub fn lumped_mass(b: &[f64], len: f64) -> Vec<f64> {
    let n = b.len() - 1;
    let h = len / n as f64;
    (1..n).map(|i| h * b[i]).collect()
}

/// All eigenvalues ascending, with eigenvectors in the interior-node basis
/// (columns), for positive `b`.
pub fn eigen(rho: &[f64], b: &[f64], len: f64) -> (Vec<f64>, DMatrix<f64>) {
    let k = stiffness(rho, len);
    let m = lumped_mass(b, len);
    assert!(m.iter().all(|&v| v > 0.0), "dense oracle needs b > 0");
    let s: Vec<f64> = m.iter().map(|v| 1.0 / v.sqrt()).collect();
    let a = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| s[i] * k[(i, j)] * s[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(k.nrows(), order.len(), |r, c| s[r] * eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn principal_eigenvalue(rho: &[f64], b: &[f64], len: f64) -> f64 {
    eigen(rho, b, len).0[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_sine_spectrum() {
        let n = 16;
        let h = 1.0 / n as f64;
        let (vals, _) = eigen(&vec![1.0; n], &vec![1.0; n + 1], 1.0);
        for (k, v) in vals.iter().enumerate() {
            let exact = 4.0 / (h * h) * (std::f64::consts::PI * (k + 1) as f64 * h / 2.0).sin().powi(2);
            assert!((v - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn linear_in_rho() {
        let rho: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b = vec![1.0; 11];
        let l1 = principal_eigenvalue(&rho, &b, 1.0);
        let rho3: Vec<f64> = rho.iter().map(|r| 3.0 * r).collect();
        assert!((principal_eigenvalue(&rho3, &b, 1.0) - 3.0 * l1).abs() < 1e-10 * l1);
    }
}
