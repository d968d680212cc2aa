//! Small dense linear algebra: a row-major matrix and a one-sided Jacobi SVD
//! used for rank-revealing range projections.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin singular value decomposition `A = U diag(s) V^T`.
///
/// `u` is `rows x cols`, `v` is `cols x cols`; columns with zero singular
/// value carry a zero column in `u`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi SVD.
    pub fn new(a: &Matrix) -> Svd {
        let (m, n) = (a.rows, a.cols);
        let mut w = a.clone();
        let mut v = Matrix::identity(n);
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        let (wp, wq) = (w[(i, p)], w[(i, q)]);
                        alpha += wp * wp;
                        beta += wq * wq;
                        gamma += wp * wq;
                    }
                    if gamma == 0.0 || libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    for i in 0..m {
                        let (wp, wq) = (w[(i, p)], w[(i, q)]);
                        w[(i, p)] = c * wp - s * wq;
                        w[(i, q)] = s * wp + c * wq;
                    }
                    for i in 0..n {
                        let (vp, vq) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut singular_values = vec![0.0; n];
        let mut u = Matrix::zeros(m, n);
        for j in 0..n {
            let norm = libm::sqrt((0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>());
            singular_values[j] = norm;
            if norm > 0.0 {
                for i in 0..m {
                    u[(i, j)] = w[(i, j)] / norm;
                }
            }
        }
        Svd {
            u,
            singular_values,
            v,
        }
    }

    /// Numerical rank threshold: `max(rows, cols) * eps * s_max`.
    pub fn tolerance(&self) -> f64 {
        let smax = self.singular_values.iter().copied().fold(0.0, f64::max);
        (self.u.rows.max(self.v.rows) as f64) * f64::EPSILON * smax
    }

    pub fn rank(&self) -> usize {
        let tol = self.tolerance();
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }
}

/// Result of projecting a vector onto the range of a matrix.
#[derive(Debug, Clone)]
pub struct RangeProjection {
    /// `||(I - P_range) v||`.
    pub residual: f64,
    /// The component of `v` orthogonal to the range.
    pub orthogonal: Vec<f64>,
    /// Minimum-norm least-squares solution of `A x = v`.
    pub solution: Vec<f64>,
    pub rank: usize,
}

/// Projects `v` onto `Range(a)` through the SVD pseudo-inverse.
pub fn project_onto_range(a: &Matrix, v: &[f64]) -> RangeProjection {
    assert_eq!(a.rows, v.len());
    let svd = Svd::new(a);
    let tol = svd.tolerance();
    let mut fitted = vec![0.0; a.rows];
    let mut solution = vec![0.0; a.cols];
    let mut rank = 0;
    for j in 0..a.cols {
        let s = svd.singular_values[j];
        if s <= tol {
            continue;
        }
        rank += 1;
        let coef: f64 = (0..a.rows).map(|i| svd.u[(i, j)] * v[i]).sum();
        for i in 0..a.rows {
            fitted[i] += coef * svd.u[(i, j)];
        }
        for i in 0..a.cols {
            solution[i] += svd.v[(i, j)] * coef / s;
        }
    }
    let orthogonal: Vec<f64> = v.iter().zip(&fitted).map(|(x, f)| x - f).collect();
    let residual = libm::sqrt(orthogonal.iter().map(|x| x * x).sum());
    RangeProjection {
        residual,
        orthogonal,
        solution,
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_matrix() {
        let a = Matrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let svd = Svd::new(&a);
        for i in 0..3 {
            for j in 0..2 {
                let x: f64 = (0..2)
                    .map(|k| svd.u[(i, k)] * svd.singular_values[k] * svd.v[(j, k)])
                    .sum();
                assert!((x - a[(i, j)]).abs() < 1e-12);
            }
        }
        assert_eq!(svd.rank(), 2);
    }

    #[test]
    fn rank_deficient_projection() {
        // Two identical columns: range is span{(1,1,0)}.
        let a = Matrix::from_rows(3, 2, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let p = project_onto_range(&a, &[1.0, 0.0, 2.0]);
        assert_eq!(p.rank, 1);
        let expected = libm::sqrt(0.5 * 0.5 * 2.0 + 4.0);
        assert!((p.residual - expected).abs() < 1e-12);
        // minimum-norm solution splits the weight evenly
        assert!((p.solution[0] - 0.25).abs() < 1e-12);
        assert!((p.solution[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_has_full_row_range() {
        let a = Matrix::from_rows(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let p = project_onto_range(&a, &[0.3, -0.7]);
        assert!(p.residual < 1e-14);
        let back = a.mul_vec(&p.solution);
        assert!((back[0] - 0.3).abs() < 1e-12 && (back[1] + 0.7).abs() < 1e-12);
    }
}
