//! Dense complex Hermitian linear algebra.
//!
//! Only what the solvers need: Cholesky, extreme eigenvalue, Hermitian
//! solves and column-major vectorization. All matrices are small (a few
//! dozen rows at most), so everything is dense and allocation-happy.

use num_complex::Complex64;
use thiserror::Error;

use crate::flops::FlopCounter;

/// Hermitian symmetry tolerance (absolute, entrywise).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Cholesky pivot tolerance relative to the largest input diagonal entry.
pub const PIVOT_REL_TOL: f64 = 1e-14;
/// Jacobi stops once the off-diagonal mass falls below this fraction of the
/// Frobenius norm.
pub const JACOBI_REL_TOL: f64 = 1e-13;
/// Sweep cap for the Jacobi eigenvalue iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("matrix is not Hermitian: |a[{i}][{j}] - conj(a[{j}][{i}])| = {deviation:.3e}")]
    NotHermitian { i: usize, j: usize, deviation: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
}

/// Overridable numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub pivot_rel: f64,
    pub jacobi_rel: f64,
    pub jacobi_max_sweeps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: HERMITIAN_TOL,
            pivot_rel: PIVOT_REL_TOL,
            jacobi_rel: JACOBI_REL_TOL,
            jacobi_max_sweeps: JACOBI_MAX_SWEEPS,
        }
    }
}

/// Dense general complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Outer product `a bᴴ`.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `Aᴴ y`
    pub fn adjoint_mul_vec(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j).conj() * y[i];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }
}

/// Dense Hermitian matrix, stored in full (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds from row-major entries, checking Hermitian symmetry.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        Self::with_tolerance(dim, data, HERMITIAN_TOL)
    }

    pub fn with_tolerance(dim: usize, data: Vec<Complex64>, tol: f64) -> Result<Self, NumericsError> {
        if dim == 0 {
            return Err(NumericsError::Empty);
        }
        if data.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        for i in 0..dim {
            for j in i..dim {
                let deviation = (data[i * dim + j] - data[j * dim + i].conj()).norm();
                if deviation > tol {
                    return Err(NumericsError::NotHermitian { i, j, deviation });
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds from the upper triangle produced by `f`, mirroring it below
    /// the diagonal. Diagonal imaginary parts are dropped.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(f(i, i).re, 0.0);
            for j in i + 1..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v.conj();
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self::diagonal(&vec![0.0; dim])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_upper_fn(values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Rank-one `b bᴴ`.
    pub fn outer(b: &[Complex64]) -> Self {
        Self::from_upper_fn(b.len(), |i, j| b[i] * b[j].conj())
    }

    /// `Mᴴ M` for an arbitrary (square or tall) matrix.
    pub fn gram(m: &ComplexMatrix) -> Self {
        Self::from_upper_fn(m.cols(), |i, j| {
            (0..m.rows()).map(|k| m.get(k, i).conj() * m.get(k, j)).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·I`
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += s;
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Real quadratic form `xᴴ A x`.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let ax: Complex64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += (x[i].conj() * ax).re;
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.data[i * self.dim + i].re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Upper-triangular factor with real positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular {
    dim: usize,
    data: Vec<Complex64>,
}

impl UpperTriangular {
    /// Wraps row-major entries. Panics if the strict lower part is nonzero
    /// or the diagonal is not real positive.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        for i in 0..dim {
            for j in 0..i {
                assert!(data[i * dim + j] == Complex64::new(0.0, 0.0), "nonzero below diagonal");
            }
            let d = data[i * dim + i];
            assert!(d.im == 0.0 && d.re > 0.0, "diagonal must be real positive");
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    /// Row `i`, including the zeros left of the diagonal.
    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Real diagonal entry `U[i][i]`.
    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * self.dim + i].re
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| (i..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `‖U x‖²`
    pub fn norm_sqr_of(&self, x: &[Complex64]) -> f64 {
        self.mul_vec(x).iter().map(Complex64::norm_sqr).sum()
    }

    /// `Uᴴ U`
    pub fn gram(&self) -> HermitianMatrix {
        HermitianMatrix::from_upper_fn(self.dim, |i, j| {
            (0..=i.min(j)).map(|k| self.get(k, i).conj() * self.get(k, j)).sum()
        })
    }
}

/// Canonical Cholesky factor `U` with `UᴴU = a`.
pub fn cholesky_upper(a: &HermitianMatrix) -> Result<UpperTriangular, NumericsError> {
    cholesky_upper_with(a, &Tolerances::default(), &mut FlopCounter::default())
}

pub fn cholesky_upper_with(
    a: &HermitianMatrix,
    tol: &Tolerances,
    flops: &mut FlopCounter,
) -> Result<UpperTriangular, NumericsError> {
    let n = a.dim();
    let threshold = tol.pivot_rel * a.max_diagonal().max(0.0);
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let mut d = a.get(i, i).re;
        for k in 0..i {
            d -= u[k * n + i].norm_sqr();
        }
        flops.real(3 * i as u64);
        if !(d > threshold) || d <= 0.0 {
            return Err(NumericsError::NotPositiveDefinite { pivot: i, value: d });
        }
        let dii = d.sqrt();
        flops.real(1);
        u[i * n + i] = Complex64::new(dii, 0.0);
        for j in i + 1..n {
            let mut s = a.get(i, j);
            for k in 0..i {
                s -= u[k * n + i].conj() * u[k * n + j];
            }
            flops.cmul(i as u64);
            flops.cadd(i as u64);
            u[i * n + j] = s / dii;
            flops.real(2);
        }
    }
    Ok(UpperTriangular { dim: n, data: u })
}

/// All eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>, NumericsError> {
    hermitian_eigenvalues_with(a, &Tolerances::default(), &mut FlopCounter::default())
}

/// Cyclic Jacobi on the real symmetric embedding `[[X, -Y], [Y, X]]` of
/// `A = X + iY`. Each eigenvalue of `A` appears twice in the embedding.
pub fn hermitian_eigenvalues_with(
    a: &HermitianMatrix,
    tol: &Tolerances,
    flops: &mut FlopCounter,
) -> Result<Vec<f64>, NumericsError> {
    let n = a.dim();
    let m = 2 * n;
    let mut s = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = a.get(i, j);
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    let total: f64 = s.iter().map(|v| v * v).sum();
    let target = (tol.jacobi_rel * total.sqrt()).powi(2);
    let mut converged = false;
    for _sweep in 0..tol.jacobi_max_sweeps {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i * m + j] * s[i * m + j])
            .sum();
        flops.real(2 * (m * m) as u64);
        if off <= target || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = s[p * m + p];
                let aqq = s[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = c * skp - sn * skq;
                    s[k * m + q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = c * spk - sn * sqk;
                    s[q * m + k] = sn * spk + c * sqk;
                }
                flops.real(12 * m as u64 + 12);
            }
        }
    }
    if !converged {
        return Err(NumericsError::NonConvergence {
            sweeps: tol.jacobi_max_sweeps,
        });
    }
    let mut diag: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
    diag.sort_by(f64::total_cmp);
    // pairs of duplicates; average each pair
    Ok(diag.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> Result<f64, NumericsError> {
    min_eigenvalue_with(a, &Tolerances::default(), &mut FlopCounter::default())
}

pub fn min_eigenvalue_with(
    a: &HermitianMatrix,
    tol: &Tolerances,
    flops: &mut FlopCounter,
) -> Result<f64, NumericsError> {
    Ok(hermitian_eigenvalues_with(a, tol, flops)?[0])
}

/// Solves `a x = rhs` for Hermitian positive definite `a`.
pub fn solve_hermitian(a: &HermitianMatrix, rhs: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    solve_hermitian_with(a, rhs, &Tolerances::default(), &mut FlopCounter::default())
}

pub fn solve_hermitian_with(
    a: &HermitianMatrix,
    rhs: &[Complex64],
    tol: &Tolerances,
    flops: &mut FlopCounter,
) -> Result<Vec<Complex64>, NumericsError> {
    if rhs.len() != a.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.dim(),
            actual: rhs.len(),
        });
    }
    let u = cholesky_upper_with(a, tol, flops)?;
    let n = a.dim();
    let tri = (n * n.saturating_sub(1)) as u64;
    flops.cmul(tri);
    flops.cadd(tri);
    flops.real(4 * n as u64);
    // Uᴴ y = rhs (forward)
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= u.get(k, i).conj() * y[k];
        }
        y[i] = s / u.diag(i);
    }
    // U x = y (backward)
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= u.get(i, k) * x[k];
        }
        x[i] = s / u.diag(i);
    }
    Ok(x)
}

/// Column-major stacking of an `N×M` matrix into a length-`N·M` vector.
pub fn vectorize(m: &ComplexMatrix) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.rows() * m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            out.push(m.get(i, j));
        }
    }
    out
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[Complex64], rows: usize, cols: usize) -> ComplexMatrix {
    assert_eq!(v.len(), rows * cols);
    ComplexMatrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}
