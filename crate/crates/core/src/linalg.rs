//! Dense row-major matrices and the handful of decompositions the analyses need.
//!
//! Everything runs in `f64`. Singular values come from one-sided (Hestenes)
//! Jacobi orthogonalization, which is accurate for the small, wide matrices
//! produced by classifier weight stacks and subspace comparisons.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// One-sided Jacobi: rotates the vectors in place until they are mutually
/// orthogonal. The span is preserved and the resulting norms are the
/// singular values of the matrix whose rows are `vecs`.
fn jacobi_orthogonalize(vecs: &mut [Vec<f64>]) {
    const EPS: f64 = 1e-15;
    const MAX_SWEEPS: usize = 100;
    let m = vecs.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = dot(&vecs[p], &vecs[p]);
                let beta = dot(&vecs[q], &vecs[q]);
                let gamma = dot(&vecs[p], &vecs[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= EPS * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (head, tail) = vecs.split_at_mut(q);
                let vp = &mut head[p];
                let vq = &mut tail[0];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let a = *x;
                    let b = *y;
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Singular values in descending order (`min(rows, cols)` of them).
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let source = if m.rows() <= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let mut vecs: Vec<Vec<f64>> = source.row_iter().map(|r| r.to_vec()).collect();
    jacobi_orthogonalize(&mut vecs);
    let mut s: Vec<f64> = vecs.iter().map(|v| norm(v)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Orthonormal basis of the row space of `m`, ordered by descending singular
/// value. Directions whose singular value is at most `rel_tol` times the
/// largest are treated as numerically zero.
pub fn row_space_basis(m: &Matrix, rel_tol: f64) -> Vec<Vec<f64>> {
    let mut vecs: Vec<Vec<f64>> = m.row_iter().map(|r| r.to_vec()).collect();
    jacobi_orthogonalize(&mut vecs);
    let mut scored: Vec<(f64, Vec<f64>)> = vecs.into_iter().map(|v| (norm(&v), v)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = scored.first().map(|s| s.0).unwrap_or(0.0);
    if top == 0.0 {
        return Vec::new();
    }
    scored
        .into_iter()
        .filter(|(s, _)| *s > rel_tol * top)
        .map(|(s, mut v)| {
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
        .collect()
}

/// Removes from `v` its components along the orthonormal `basis`
/// (two passes of modified Gram-Schmidt). Returns the residual norm.
pub fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
    norm(v)
}

/// Gram-Schmidt over `vectors`, skipping those whose residual falls below
/// `tol`. The result is orthonormal.
pub fn gram_schmidt(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let r = orthogonalize_against(&mut w, &basis);
        if r > tol {
            w.iter_mut().for_each(|x| *x /= r);
            basis.push(w);
        }
    }
    basis
}

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal vector sets.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let d = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mut cross = Matrix::zeros(a.len(), b.len());
    for (i, u) in a.iter().enumerate() {
        for (j, v) in b.iter().enumerate() {
            cross.set(i, j, dot(u, v));
        }
    }
    let mut angles: Vec<f64> = singular_values(&cross)
        .into_iter()
        .map(|s| libm::acos(s.clamp(0.0, 1.0)))
        .collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    Ok(angles)
}

/// Projects the centered rows of `data` onto its top two principal axes.
///
/// Uses orthogonal subspace iteration on the implicit covariance from a
/// fixed starting block, so the output is deterministic. Each axis is
/// signed so that its largest-magnitude component is positive.
pub fn pca_2d(data: &Matrix) -> Result<Matrix> {
    let (n, d) = (data.rows(), data.cols());
    if n == 0 || d == 0 {
        return Err(Error::EmptyMatrix { rows: n, cols: d });
    }
    let mut mean = vec![0.0; d];
    for r in data.row_iter() {
        axpy(1.0 / n as f64, r, &mut mean);
    }
    let mut centered = data.clone();
    for i in 0..n {
        axpy(-1.0, &mean, centered.row_mut(i));
    }
    let apply_cov = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for r in centered.row_iter() {
            axpy(dot(r, v), r, &mut out);
        }
        out
    };

    let k = d.min(2);
    let mut block: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..d)
                .map(|i| libm::sin((i * (j + 2) + 1) as f64 * 0.7548776662) + 1e-3)
                .collect()
        })
        .collect();
    block = gram_schmidt(&block, 0.0);
    for _ in 0..500 {
        let next: Vec<Vec<f64>> = block.iter().map(|v| apply_cov(v)).collect();
        let next = gram_schmidt(&next, 1e-300);
        if next.len() < block.len() {
            break;
        }
        let converged = block
            .iter()
            .zip(&next)
            .all(|(a, b)| 1.0 - dot(a, b).abs() < 1e-14);
        block = next;
        if converged {
            break;
        }
    }
    // Rayleigh-Ritz on the 2-D block so the axes come out in variance order.
    if block.len() == 2 {
        let c0 = apply_cov(&block[0]);
        let c1 = apply_cov(&block[1]);
        let (a, b, c) = (dot(&block[0], &c0), dot(&block[0], &c1), dot(&block[1], &c1));
        let theta = 0.5 * libm::atan2(2.0 * b, a - c);
        let (cs, sn) = (libm::cos(theta), libm::sin(theta));
        let v0: Vec<f64> = block[0].iter().zip(&block[1]).map(|(x, y)| cs * x + sn * y).collect();
        let v1: Vec<f64> = block[0].iter().zip(&block[1]).map(|(x, y)| -sn * x + cs * y).collect();
        let (var0, var1) = (dot(&v0, &apply_cov(&v0)), dot(&v1, &apply_cov(&v1)));
        block = if var0 >= var1 { vec![v0, v1] } else { vec![v1, v0] };
    }
    for v in block.iter_mut() {
        let pivot = v.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut out = Matrix::zeros(n, 2);
    for (i, r) in centered.row_iter().enumerate() {
        for (j, v) in block.iter().enumerate() {
            out.set(i, j, dot(r, v));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_diagonal() {
        let m = Matrix::from_rows(&[[3.0, 0.0, 0.0], [0.0, -5.0, 0.0]]).unwrap();
        let s = singular_values(&m);
        assert!((s[0] - 5.0).abs() < 1e-12);
        assert!((s[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        // [[1,1],[0,1]] has singular values sqrt((3 ± sqrt 5)/2).
        let m = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let s = singular_values(&m);
        let r5 = libm::sqrt(5.0);
        assert!((s[0] - libm::sqrt((3.0 + r5) / 2.0)).abs() < 1e-12);
        assert!((s[1] - libm::sqrt((3.0 - r5) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn row_space_of_rank_deficient_stack() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let basis = row_space_basis(&m, 1e-10);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!((norm(b) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-12);
        assert_eq!(rank(&m, 1e-10), 2);
    }

    #[test]
    fn principal_angles_of_planes() {
        let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let s = libm::sqrt(0.5);
        let b = vec![vec![1.0, 0.0, 0.0], vec![0.0, s, s]];
        let angles = principal_angles(&a, &b).unwrap();
        assert!(angles[0].abs() < 1e-7);
        assert!((angles[1] - core::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn pca_recovers_dominant_axis() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 - 9.5;
                vec![3.0 * t, 0.1 * libm::sin(i as f64), 0.5 * (i % 2) as f64]
            })
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let p = pca_2d(&m).unwrap();
        // First coordinate is (up to sign, fixed positive) the centered x.
        for (i, r) in rows.iter().enumerate() {
            assert!((p.get(i, 0).abs() - r[0].abs()).abs() < 0.05);
        }
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = a.transpose();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[5.0, 11.0, 11.0, 25.0]);
    }
}
