//! Dense small-dimension numerical kernels: pseudoinverse, symmetric
//! eigendecomposition, PSD projection, inverse square root, and the normal /
//! chi-square distribution functions used downstream.
//!
//! Everything here targets matrices of dimension at most a few dozen; the
//! eigensolver is a cyclic Jacobi sweep, which is exact enough and keeps
//! symmetry bit-for-bit.

mod dist;
mod jacobi;

pub use dist::{chi2_cdf, chi2_quantile, chi2_sf, std_normal_cdf, std_normal_quantile};

/// Sampler fast path: normal quantile of a uniform already known to lie in
/// (0, 1), skipping the domain check.
pub(crate) fn ppnd16_from_uniform(u: f64) -> f64 {
    dist::ppnd16(u)
}

use crate::error::{Error, Result};

/// Dense column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Vector { data: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector::new(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector::new(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector::new(self.data.iter().map(|v| c * v).collect())
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.data[i] = v;
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector::new(data)
    }
}

/// Dense matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("matrix dimensions must be >= 1".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} != rows*cols {}",
                data.len(),
                rows * cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.dim(), "matvec dimension mismatch");
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            out.set(i, self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum());
        }
        out
    }

    /// A^T A as a symmetric matrix.
    pub fn gram(&self) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                for b in a..self.cols {
                    let v = g.get(a, b) + r[a] * r[b];
                    g.set(a, b, v);
                }
            }
        }
        g
    }

    /// A^T y.
    pub fn tr_matvec(&self, y: &Vector) -> Vector {
        assert_eq!(self.rows, y.dim(), "tr_matvec dimension mismatch");
        let mut out = Vector::zeros(self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            let yi = y.get(i);
            for j in 0..self.cols {
                out.set(j, out.get(j) + r[j] * yi);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Symmetric matrix; the full square is stored and the two triangles are
/// mirrored bit-exactly by every mutation path.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = SymMatrix::zeros(dim);
        for i in 0..dim {
            s.set(i, i, 1.0);
        }
        s
    }

    /// Builds from a full square matrix, requiring exact symmetry.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidInput("symmetric matrix must be square".into()));
        }
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymMatrix { dim: m.rows(), data: m.clone().data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entry (i, j) and mirrors to (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.data.clone() }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..self.dim {
                acc += self.get(i, j) * v.get(j);
            }
            out.set(i, acc);
        }
        out
    }
}

/// Reassembles V * diag(vals) * V^T as a symmetric matrix.
fn recompose(eigenvectors: &Matrix, vals: &[f64]) -> SymMatrix {
    let d = eigenvectors.rows();
    SymMatrix::from_fn(d, |i, j| {
        (0..d).map(|k| eigenvectors.get(i, k) * vals[k] * eigenvectors.get(j, k)).sum()
    })
}

/// Symmetric eigendecomposition via cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as matrix columns.
pub fn sym_eigen(s: &SymMatrix) -> Result<(Vector, Matrix)> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("sym_eigen: non-finite entries".into()));
    }
    let (mut vals, mut vecs) = jacobi::jacobi_eigen(s);
    // sort descending, permuting eigenvector columns alongside
    let d = s.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
    let mut sorted_vecs = Matrix::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..d {
            sorted_vecs.set(i, new_col, vecs.get(i, old_col));
        }
    }
    vals = sorted_vals;
    vecs = sorted_vecs;
    Ok((Vector::new(vals), vecs))
}

/// Moore-Penrose pseudoinverse.
///
/// Computed through the symmetric eigendecomposition of the Gram matrix
/// (A^+ = (A^T A)^+ A^T), with singular values below `rel_tol * sigma_max`
/// treated as zero. Pass `None` for the default 1e-12 relative threshold.
pub fn pinv(a: &Matrix, rel_tol: Option<f64>) -> Result<Matrix> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("pinv: non-finite entries".into()));
    }
    let rel = rel_tol.unwrap_or(1e-12);
    if rel < 0.0 {
        return Err(Error::InvalidInput("pinv: rel_tol must be >= 0".into()));
    }
    let gram = a.gram();
    let (vals, vecs) = sym_eigen(&gram)?;
    // eigenvalues of A^T A are sigma^2; cut at (rel * sigma_max)^2
    let lam_max = vals.get(0).max(0.0);
    let cut = lam_max * rel * rel;
    let inv_vals: Vec<f64> = vals
        .iter()
        .map(|&l| if l > cut && l > 0.0 { 1.0 / l } else { 0.0 })
        .collect();
    let gram_pinv = recompose(&vecs, &inv_vals);
    // (A^T A)^+ A^T
    let at = a.transpose();
    Ok(gram_pinv.to_matrix().matmul(&at))
}

/// Frobenius-nearest positive semidefinite matrix: eigenvalues clamped at 0.
pub fn psd_project(s: &SymMatrix) -> Result<SymMatrix> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("psd_project: non-finite entries".into()));
    }
    let (vals, vecs) = sym_eigen(s)?;
    if vals.iter().all(|&l| l >= 0.0) {
        return Ok(s.clone());
    }
    let clamped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    Ok(recompose(&vecs, &clamped))
}

/// S^{-1/2} for a PSD matrix, flooring eigenvalues before inversion.
///
/// Pass `None` to floor at `1e-12 * trace(S)`. Errors when every eigenvalue
/// sits at or below the floor (an all-zero covariance).
pub fn inv_sqrt_psd(s: &SymMatrix, floor: Option<f64>) -> Result<SymMatrix> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("inv_sqrt_psd: non-finite entries".into()));
    }
    let floor = floor.unwrap_or(1e-12 * s.trace().abs());
    let (vals, vecs) = sym_eigen(s)?;
    if vals.iter().all(|&l| l <= floor) {
        return Err(Error::DegenerateCovariance(
            "inv_sqrt_psd: matrix has no eigenvalue above the floor".into(),
        ));
    }
    let inv_sqrt: Vec<f64> = vals
        .iter()
        .map(|&l| if l > floor { 1.0 / l.sqrt() } else { 0.0 })
        .collect();
    Ok(recompose(&vecs, &inv_sqrt))
}

/// Inverse of a symmetric matrix through its eigendecomposition.
///
/// Returns the pseudoinverse together with a `degenerate` flag when any
/// eigenvalue falls below `1e-12 * |lambda|_max` in magnitude.
pub fn sym_inverse(s: &SymMatrix) -> Result<(SymMatrix, bool)> {
    if !s.is_finite() {
        return Err(Error::InvalidInput("sym_inverse: non-finite entries".into()));
    }
    let (vals, vecs) = sym_eigen(s)?;
    let scale = vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let cut = 1e-12 * scale;
    let mut degenerate = false;
    let inv_vals: Vec<f64> = vals
        .iter()
        .map(|&l| {
            if l.abs() > cut && l != 0.0 {
                1.0 / l
            } else {
                degenerate = true;
                0.0
            }
        })
        .collect();
    Ok((recompose(&vecs, &inv_vals), degenerate))
}
