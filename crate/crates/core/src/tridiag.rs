//! Thomas elimination for the constant-coefficient systems (I + sigma*T),
//! T the 1D second-difference matrix with stencil (-1, 2, -1)/h^2.
//!
//! The matrix is Toeplitz and strictly diagonally dominant for sigma >= 0
//! (diag 1 + 2 sigma/h^2 vs off-diagonal sum 2 sigma/h^2), so the
//! factorization is computed once per (n, sigma, h) and reused for every
//! grid line.

/// Precomputed forward-elimination pivots for one (n, sigma, h) system.
#[derive(Debug, Clone)]
pub struct ThomasFactors {
    /// off-diagonal entry, -sigma/h^2
    off: f64,
    /// modified diagonal after forward elimination
    diag: Vec<f64>,
}

impl ThomasFactors {
    pub fn new(n: usize, sigma: f64, h: f64) -> Self {
        assert!(sigma >= 0.0, "shift must be nonnegative");
        assert!(n >= 1);
        let d = 1.0 + 2.0 * sigma / (h * h);
        let off = -sigma / (h * h);
        let mut diag = Vec::with_capacity(n);
        diag.push(d);
        for i in 1..n {
            diag.push(d - off * off / diag[i - 1]);
        }
        Self { off, diag }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves one line in place.
    pub fn solve_line(&self, rhs: &mut [f64]) {
        let n = self.diag.len();
        assert_eq!(rhs.len(), n);
        // forward sweep
        for i in 1..n {
            rhs[i] -= self.off / self.diag[i - 1] * rhs[i - 1];
        }
        // back substitution
        rhs[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.off * rhs[i + 1]) / self.diag[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense LU oracle: assemble (I + sigma*T) and solve by Gaussian
    /// elimination with partial pivoting.
    fn dense_solve(n: usize, sigma: f64, h: f64, rhs: &[f64]) -> Vec<f64> {
        let d = 1.0 + 2.0 * sigma / (h * h);
        let off = -sigma / (h * h);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = d;
            if i > 0 {
                a[i][i - 1] = off;
            }
            if i + 1 < n {
                a[i][i + 1] = off;
            }
        }
        let mut b = rhs.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let pivot_row = a[col].clone();
            for row in col + 1..n {
                let f = a[row][col] / pivot_row[col];
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
        for row in (0..n).rev() {
            let tail: f64 = a[row][row + 1..].iter().zip(&b[row + 1..]).map(|(x, y)| x * y).sum();
            b[row] = (b[row] - tail) / a[row][row];
        }
        b
    }

    #[test]
    fn zero_shift_is_identity() {
        let f = ThomasFactors::new(5, 0.0, 0.1);
        let mut rhs = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let want = rhs.clone();
        f.solve_line(&mut rhs);
        for (a, b) in rhs.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn three_node_system_vs_dense_oracle() {
        let h = 0.25;
        let sigma = h * h;
        let f = ThomasFactors::new(3, sigma, h);
        let mut rhs = vec![1.0, 2.0, -1.0];
        let want = dense_solve(3, sigma, h, &rhs);
        f.solve_line(&mut rhs);
        for (a, b) in rhs.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13, "{rhs:?} vs {want:?}");
        }
    }

    #[test]
    fn matches_dense_oracle_up_to_32() {
        for n in [1usize, 2, 4, 8, 17, 32] {
            let h = 1.0 / (n as f64 + 1.0);
            for sigma in [0.0, 1e-4, 0.01, 1.0] {
                let rhs: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
                let want = dense_solve(n, sigma, h, &rhs);
                let f = ThomasFactors::new(n, sigma, h);
                let mut got = rhs.clone();
                f.solve_line(&mut got);
                let scale = want.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() < 1e-12 * scale, "n={n} sigma={sigma}");
                }
            }
        }
    }
}
