//! Cyclic (periodic) tridiagonal Hermitian matrices.
//!
//! Both the discrete action Hessian and the twisted Bott operator have this shape:
//! a tridiagonal band plus one coupling between the first and last node. Solves and
//! inertia counts are done in O(N) by eliminating the leading `N - 1` block and
//! treating the last node as a border.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Hermitian matrix with `M[i][i] = diag[i]`, `M[i][i+1] = upper[i]` for `i < N - 1`
/// and the wrap-around entry `M[N-1][0] = upper[N-1]` (so `M[0][N-1]` is its conjugate).
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    pub diag: Vec<f64>,
    pub upper: Vec<Complex64>,
}

impl CyclicTridiagonal {
    pub fn new(diag: Vec<f64>, upper: Vec<Complex64>) -> Self {
        assert_eq!(diag.len(), upper.len(), "band lengths differ");
        assert!(diag.len() >= 3, "cyclic tridiagonal needs at least 3 nodes");
        Self { diag, upper }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Max-row-sum norm, an upper bound for the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i == 0 { self.upper[n - 1].norm() } else { self.upper[i - 1].norm() };
                self.diag[i].abs() + left + self.upper[i].norm()
            })
            .fold(0.0, f64::max)
    }

    /// Entry `M[row][col]` of the dense matrix.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let n = self.dim();
        if row == col {
            Complex64::new(self.diag[row], 0.0)
        } else if col == row + 1 {
            self.upper[row]
        } else if row == col + 1 {
            self.upper[col].conj()
        } else if row == n - 1 && col == 0 {
            self.upper[n - 1]
        } else if row == 0 && col == n - 1 {
            self.upper[n - 1].conj()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            m[(i, i)] = Complex64::new(self.diag[i], 0.0);
            let j = (i + 1) % n;
            m[(i, j)] += self.upper[i];
            m[(j, i)] += self.upper[i].conj();
        }
        m
    }

    /// Real part of the dense matrix; only meaningful when all couplings are real.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        self.to_dense().map(|z| z.re)
    }

    /// Number of eigenvalues strictly below `shift`, by Sylvester's law of inertia.
    pub fn count_below(&self, shift: f64) -> usize {
        let n = self.dim();
        let tiny = f64::EPSILON * self.norm_bound().max(f64::MIN_POSITIVE);
        let guard = |p: f64| if p == 0.0 { -tiny } else { p };

        // Border column c (rows 0..n-1 of the last column).
        let corner = self.upper[n - 1].conj();
        let mut negatives = 0usize;
        let mut pivot = guard(self.diag[0] - shift);
        if pivot < 0.0 {
            negatives += 1;
        }
        // w solves L w = c; Schur complement uses sum |w_i|^2 / p_i.
        let mut w = corner;
        if n - 2 == 0 {
            w += self.upper[0];
        }
        let mut schur = (w.norm_sqr()) / pivot;
        for i in 1..n - 1 {
            let coupling = self.upper[i - 1];
            let l = coupling.conj() / pivot;
            pivot = guard(self.diag[i] - shift - coupling.norm_sqr() / pivot);
            if pivot < 0.0 {
                negatives += 1;
            }
            let mut c_i = Complex64::new(0.0, 0.0);
            if i == n - 2 {
                c_i += self.upper[n - 2];
            }
            w = c_i - l * w;
            schur += w.norm_sqr() / pivot;
        }
        let last = self.diag[n - 1] - shift - schur;
        if last < 0.0 {
            negatives += 1;
        }
        negatives
    }

    /// Dense Hermitian eigenvalues in ascending order.
    pub fn dense_eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = if self.upper.iter().all(|z| z.im == 0.0) {
            SymmetricEigen::new(self.to_dense_real()).eigenvalues.iter().copied().collect()
        } else {
            SymmetricEigen::new(self.to_dense()).eigenvalues.iter().copied().collect()
        };
        values.sort_by(f64::total_cmp);
        values
    }
}

/// Solves `M z = rhs` for a real symmetric cyclic tridiagonal `M` with diagonal `diag`,
/// super-diagonal `upper[0..n-1]` and wrap coupling `upper[n-1]`.
///
/// Returns `None` when an elimination pivot or the border Schur complement vanishes.
pub fn solve_cyclic_real(diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(n >= 3 && upper.len() == n && rhs.len() == n);
    let m = n - 1;
    let scale = diag.iter().chain(upper).fold(0.0f64, |a, b| a.max(b.abs()));
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);

    // LDL^T of the leading m x m block; simultaneously forward-substitute r and c.
    let mut pivots = vec![0.0; m];
    let mut lower = vec![0.0; m];
    let mut wr = vec![0.0; m];
    let mut wc = vec![0.0; m];
    for i in 0..m {
        let c_i = if i == 0 { upper[n - 1] } else { 0.0 } + if i == m - 1 { upper[m - 1] } else { 0.0 };
        if i == 0 {
            pivots[0] = diag[0];
            wr[0] = rhs[0];
            wc[0] = c_i;
        } else {
            let l = upper[i - 1] / pivots[i - 1];
            lower[i] = l;
            pivots[i] = diag[i] - l * upper[i - 1];
            wr[i] = rhs[i] - l * wr[i - 1];
            wc[i] = c_i - l * wc[i - 1];
        }
        if pivots[i].abs() <= tiny || !pivots[i].is_finite() {
            return None;
        }
    }
    // Back substitution: zr = B^-1 r, zc = B^-1 c.
    let mut zr = vec![0.0; m];
    let mut zc = vec![0.0; m];
    for i in (0..m).rev() {
        let (mut a, mut b) = (wr[i] / pivots[i], wc[i] / pivots[i]);
        if i + 1 < m {
            a -= lower[i + 1] * zr[i + 1];
            b -= lower[i + 1] * zc[i + 1];
        }
        zr[i] = a;
        zc[i] = b;
    }
    let c_dot = |z: &[f64]| -> f64 {
        let mut s = upper[n - 1] * z[0];
        s += upper[m - 1] * z[m - 1];
        s
    };
    let schur = diag[m] - c_dot(&zc);
    if schur.abs() <= tiny || !schur.is_finite() {
        return None;
    }
    let last = (rhs[m] - c_dot(&zr)) / schur;
    let mut out = Vec::with_capacity(n);
    out.extend(zr.iter().zip(&zc).map(|(a, b)| a - b * last));
    out.push(last);
    if out.iter().all(|v| v.is_finite()) {
        Some(out)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real_cyclic(diag: Vec<f64>, upper: Vec<f64>) -> CyclicTridiagonal {
        CyclicTridiagonal::new(diag, upper.into_iter().map(|u| Complex64::new(u, 0.0)).collect())
    }

    #[test]
    fn dense_layout_has_hermitian_corners() {
        let sigma = Complex64::from_polar(1.0, 0.7);
        let m = CyclicTridiagonal::new(vec![2.0; 4], vec![Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0), -sigma]);
        let d = m.to_dense();
        assert_eq!(d[(3, 0)], -sigma);
        assert_eq!(d[(0, 3)], -sigma.conj());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[(i, j)], m.entry(i, j));
                assert_eq!(d[(i, j)], d[(j, i)].conj());
            }
        }
    }

    #[test]
    fn solve_small_system() {
        let diag = vec![4.0, 5.0, 6.0, 7.0];
        let upper = vec![1.0, -2.0, 0.5, 1.5];
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let z = solve_cyclic_real(&diag, &upper, &rhs).unwrap();
        let m = real_cyclic(diag, upper).to_dense_real();
        let back = &m * nalgebra::DVector::from_vec(z);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        // Periodic second difference annihilates constants.
        let n = 8;
        assert!(solve_cyclic_real(&vec![2.0; n], &vec![-1.0; n], &vec![1.0; n]).is_none());
    }

    proptest! {
        #[test]
        fn inertia_matches_dense(
            diag in proptest::collection::vec(-3.0f64..3.0, 5..24),
            seed in proptest::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 24),
            angle in 0.0f64..6.283,
        ) {
            let n = diag.len();
            let mut upper: Vec<Complex64> = seed.iter().take(n).map(|&(re, _)| Complex64::new(re, 0.0)).collect();
            upper[n - 1] = Complex64::from_polar(seed[n - 1].1.abs() + 0.1, angle);
            let m = CyclicTridiagonal::new(diag, upper);
            let eig = m.dense_eigenvalues();
            for shift in [-1.0, 0.0, 0.5] {
                let gap = eig.iter().map(|e| (e - shift).abs()).fold(f64::INFINITY, f64::min);
                prop_assume!(gap > 1e-8);
                let dense = eig.iter().filter(|&&e| e < shift).count();
                prop_assert_eq!(m.count_below(shift), dense);
            }
        }

        #[test]
        fn real_solve_matches_dense(
            diag in proptest::collection::vec(3.5f64..6.0, 3..30),
            upper in proptest::collection::vec(-1.5f64..1.5, 30),
            rhs in proptest::collection::vec(-2.0f64..2.0, 30),
        ) {
            let n = diag.len();
            let upper = upper[..n].to_vec();
            let rhs = rhs[..n].to_vec();
            let z = solve_cyclic_real(&diag, &upper, &rhs).unwrap();
            let m = real_cyclic(diag, upper).to_dense_real();
            let back = &m * nalgebra::DVector::from_vec(z);
            for (a, b) in back.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
