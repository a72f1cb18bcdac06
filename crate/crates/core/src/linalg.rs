//! Small dense complex linear algebra.
//!
//! Sizes in this crate are at most a few hundred, so everything here is
//! straightforward O(n^3) code without blocking.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::{lit, CVec, Real};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[&[Complex<T>]]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn column(&self, j: usize) -> CVec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[Complex<T>]) -> CVec<T> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    /// `self^H * x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex<T>]) -> CVec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex::zero(); self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self[(i, j)].conj() * *xi;
            }
        }
        out
    }

    /// `self * self^H`.
    pub fn gram_rows(&self) -> Self {
        let mut g = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let v: Complex<T> = (0..self.cols)
                    .map(|c| self[(i, c)] * self[(j, c)].conj())
                    .sum();
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }

    /// Adds `scale * a b^H`.
    pub fn add_outer(&mut self, a: &[Complex<T>], b: &[Complex<T>], scale: Complex<T>) {
        assert_eq!(a.len(), self.rows);
        assert_eq!(b.len(), self.cols);
        for (i, ai) in a.iter().enumerate() {
            let s = scale * *ai;
            for (j, bj) in b.iter().enumerate() {
                self[(i, j)] += s * bj.conj();
            }
        }
    }

    pub fn frobenius_norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// `a^H b`.
#[inline]
pub fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * *y).sum()
}

/// `a^T b` (no conjugation).
#[inline]
pub fn dot_unconj<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

#[inline]
pub fn norm_sqr<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[Complex<T>]) -> T {
    norm_sqr(a).sqrt()
}

pub fn scale<T: Real>(a: &[Complex<T>], s: Complex<T>) -> CVec<T> {
    a.iter().map(|z| *z * s).collect()
}

/// `y += alpha * x`.
pub fn axpy<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Orthonormal basis for the span of `vectors`.
///
/// Column-pivoted Gram-Schmidt with a second orthogonalization pass. A
/// candidate whose residual norm falls to `rel_tol` times the largest input
/// norm or below is treated as linearly dependent, which gives
/// pseudo-inverse semantics for rank-deficient inputs.
pub fn orthonormal_basis<T: Real>(vectors: &[&[Complex<T>]], rel_tol: T) -> Vec<CVec<T>> {
    let mut residual: Vec<CVec<T>> = vectors.iter().map(|v| v.to_vec()).collect();
    let max_norm = residual
        .iter()
        .map(|v| norm(v))
        .fold(T::zero(), |a, b| a.max(b));
    let mut basis: Vec<CVec<T>> = Vec::new();
    if max_norm == T::zero() {
        return basis;
    }
    let threshold = rel_tol * max_norm;
    let mut remaining: Vec<usize> = (0..residual.len()).collect();
    while !remaining.is_empty() {
        let (pos, idx) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| {
                norm_sqr(&residual[*a.1])
                    .partial_cmp(&norm_sqr(&residual[*b.1]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(p, &i)| (p, i))
            .expect("non-empty");
        remaining.swap_remove(pos);
        let mut q = std::mem::take(&mut residual[idx]);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &q);
                axpy(-c, b, &mut q);
            }
        }
        let nq = norm(&q);
        if nq <= threshold {
            break;
        }
        let inv = Complex::from(T::one() / nq);
        q.iter_mut().for_each(|z| *z *= inv);
        for &i in &remaining {
            let c = dot(&q, &residual[i]);
            let r = &mut residual[i];
            axpy(-c, &q, r);
        }
        basis.push(q);
    }
    basis
}

/// Removes the components of `v` lying in the span of an orthonormal `basis`.
pub fn project_out<T: Real>(v: &[Complex<T>], basis: &[CVec<T>]) -> CVec<T> {
    let mut out = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &out);
            axpy(-c, b, &mut out);
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as the columns of the second result.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "square matrix required");
    let mut m = a.clone();
    let mut vecs = CMatrix::identity(n);
    let total = m.frobenius_norm_sqr().sqrt();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= eps * total || total == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= eps * eps * total {
                    continue;
                }
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (lit::<T>(2.0) * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let u_pp = Complex::from(c);
                let u_pq = Complex::from(s);
                let u_qp = phase.conj() * (-s);
                let u_qq = phase.conj() * c;
                for r in 0..n {
                    let x = m[(r, p)];
                    let y = m[(r, q)];
                    m[(r, p)] = x * u_pp + y * u_qp;
                    m[(r, q)] = x * u_pq + y * u_qq;
                }
                for col in 0..n {
                    let x = m[(p, col)];
                    let y = m[(q, col)];
                    m[(p, col)] = u_pp.conj() * x + u_qp.conj() * y;
                    m[(q, col)] = u_pq.conj() * x + u_qq.conj() * y;
                }
                m[(p, q)] = Complex::zero();
                m[(q, p)] = Complex::zero();
                m[(p, p)] = Complex::from(m[(p, p)].re);
                m[(q, q)] = Complex::from(m[(q, q)].re);
                for r in 0..n {
                    let x = vecs[(r, p)];
                    let y = vecs[(r, q)];
                    vecs[(r, p)] = x * u_pp + y * u_qp;
                    vecs[(r, q)] = x * u_pq + y * u_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .re
            .partial_cmp(&m[(i, i)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            sorted[(r, dst)] = vecs[(r, src)];
        }
    }
    (values, sorted)
}

/// Solves `a x = b` for Hermitian positive-definite `a` (Cholesky).
///
/// Returns `None` when `a` is not numerically positive definite.
pub fn cholesky_solve<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Option<CVec<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let mut l = CMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d = d - l[(j, k)].norm_sqr();
        }
        if !(d > T::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex::from(djj);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    let mut y = vec![Complex::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![Complex::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Some(x)
}

/// Rotates `v` so its first significant entry is real and positive.
///
/// Entries below `1e-8` times the largest magnitude are skipped.
pub fn canonical_phase<T: Real>(v: &mut [Complex<T>]) {
    let max = v.iter().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b));
    if max == T::zero() {
        return;
    }
    let floor = lit::<T>(1e-8) * max;
    if let Some(first) = v.iter().find(|z| z.norm() > floor) {
        let rot = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}
