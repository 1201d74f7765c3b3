//! Small dense and banded linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Cholesky factor of a symmetric matrix, or `None` when it is not numerically positive definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| !(l[(i, i)] > 0.0) || !l[(i, i)].is_finite()) {
        return None;
    }
    Some(chol)
}

/// `log det` of a factored symmetric positive definite matrix.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

/// Singularity guard shared by the path solver and the empirical Bayes criteria.
pub fn singularity_tol(m: &DMatrix<f64>) -> f64 {
    let max_diag = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    1e-8 * (1.0 + max_diag)
}

/// True when `m - tol * I` admits a Cholesky factorization, i.e. the smallest eigenvalue exceeds `tol`.
pub fn is_positive_definite(m: &DMatrix<f64>, tol: f64) -> bool {
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] -= tol;
    }
    cholesky(&shifted).is_some()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Numerical rank of `x`, computed from the eigenvalues of the smaller Gram matrix.
pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return 0;
    }
    let gram = if n <= p { x * x.transpose() } else { x.transpose() * x };
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let tol = max * (n.max(p) as f64) * f64::EPSILON * 10.0;
    eig.iter().filter(|&&v| v > tol).count()
}

/// Cholesky factorization of a symmetric positive definite band matrix.
///
/// Only the lower band is stored: `l[i][k]` holds `L(i, i - bw + k)`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// Factors `m`, reading only entries within `bw` of the diagonal.
    pub fn new(m: &DMatrix<f64>, bw: usize) -> Option<Self> {
        let n = m.nrows();
        let mut l = vec![vec![0.0; bw + 1]; n];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = m[(i, j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i][k + bw - i] * l[j][k + bw - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i][bw] = s.sqrt();
                } else {
                    l[i][j + bw - i] = s / l[j][bw];
                }
            }
        }
        Some(BandedCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut z = b.clone();
        for i in 0..n {
            let mut s = z[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i][k + bw - i] * z[k];
            }
            z[i] = s / self.l[i][bw];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= self.l[k][i + bw - k] * z[k];
            }
            z[i] = s / self.l[i][bw];
        }
        z
    }
}

/// Half-bandwidth of a square matrix: the largest `|i - j|` with a nonzero entry.
pub fn bandwidth(m: &DMatrix<f64>) -> usize {
    let mut bw = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, bw: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            if d == 0 {
                4.0 + i as f64 * 0.1
            } else if d <= bw {
                -1.0 / (d as f64 + 0.5)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn banded_matches_dense_solve() {
        let m = spd(12, 2);
        let b = DVector::from_fn(12, |i, _| (i as f64).sin());
        let bc = BandedCholesky::new(&m, bandwidth(&m)).unwrap();
        let x = bc.solve(&b);
        let dense = m.clone().cholesky().unwrap().solve(&b);
        assert!((x - dense).amax() < 1e-12);
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.5]));
        let chol = cholesky(&m).unwrap();
        assert!((log_det(&chol) - 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn definiteness_guard() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(!is_positive_definite(&m, singularity_tol(&m)));
        assert!(min_eigenvalue(&m).abs() < 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(is_positive_definite(&m, singularity_tol(&m)));
    }

    #[test]
    fn rank_of_wide_and_tall() {
        let x = DMatrix::from_fn(3, 6, |i, j| ((i + 1) * (j + 2)) as f64);
        assert_eq!(numerical_rank(&x), 1);
        let x = DMatrix::from_fn(6, 3, |i, j| (i as f64 + 1.0).powi(j as i32));
        assert_eq!(numerical_rank(&x), 3);
    }
}
