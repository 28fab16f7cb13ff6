//! Banded symmetric positive-definite storage and Cholesky factorization.
//!
//! Stiffness and Newton matrices on both grid kinds are banded under the
//! natural interior-node ordering (bandwidth 1 on intervals, `nx` on
//! rectangles), so a band solver covers every linear system in the crate.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix, row-major: row `i` holds columns
/// `i - bw ..= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`; the symmetric partner is implied.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    /// In-place `L L^T` factorization.
    pub fn factor(mut self) -> Result<CholeskyBand> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.data[self.idx(i, j)];
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Linear(format!("matrix not positive definite at pivot {i} ({s:e})")));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(CholeskyBand { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CholeskyBand {
    l: BandedSpd,
}

impl CholeskyBand {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_banded_spd_system() {
        let n = 9;
        let bw = 3;
        let mut dense = vec![vec![0.0; n]; n];
        let mut band = BandedSpd::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j { 10.0 + i as f64 } else { 1.0 / (1.0 + (i + 2 * j) as f64) };
                dense[i][j] = v;
                dense[j][i] = v;
                band.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let b = dense_mul(&dense, &x);
        let sol = band.factor().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut band = BandedSpd::zeros(2, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 1.0);
        band.add(1, 0, 2.0);
        assert!(band.factor().is_err());
    }
}
