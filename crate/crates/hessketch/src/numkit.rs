//! Dense symmetric linear-algebra core.
//!
//! The central object is [`GramFactor`]: an `N x r` factor `phi` whose Gram
//! matrix `H = phi * phi^T` is the Gauss-Newton Hessian under study. `H` is
//! never materialized for large `N`; every spectral quantity is read off the
//! small `r x r` Gram matrix `phi^T * phi`, which shares the nonzero
//! eigenvalues of `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};

/// Ambient dimension above which materializing the `N x N` Hessian is refused.
pub const MATERIALIZE_LIMIT: usize = 2000;

/// Default relative tolerance below which a spectrum counts as singular.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(HskError::Contract(format!(
                "matrix shape {}x{} does not match data length {}",
                rows,
                cols,
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(HskError::Contract("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(HskError::Contract("ragged rows".into()));
        }
        DenseMatrix::new(r, c, rows.concat())
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        DenseMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

/// Implicit Gram representation of a Hessian: `H = phi * phi^T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramFactor {
    n: usize,
    r: usize,
    phi: DenseMatrix,
}

impl GramFactor {
    pub fn new(phi: DenseMatrix) -> Result<Self> {
        let (n, r) = (phi.rows, phi.cols);
        if r < 1 || n < r {
            return Err(HskError::Contract(format!(
                "GramFactor requires N >= r >= 1, got N={n}, r={r}"
            )));
        }
        Ok(GramFactor { n, r, phi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn phi(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.phi.row(i)
    }

    /// Squared Euclidean norm of row `i`, i.e. the Hessian diagonal `H_ii`.
    pub fn diag_entry(&self, i: usize) -> f64 {
        self.phi.row(i).iter().map(|x| x * x).sum()
    }

    /// The `r x r` Gram matrix `phi^T * phi`.
    pub fn small_gram(&self) -> DMatrix<f64> {
        let phi = self.phi.to_nalgebra();
        phi.tr_mul(&phi)
    }

    /// Materializes the full `N x N` Hessian. Only allowed for small `N`.
    pub fn materialize_hessian(&self) -> Result<DenseMatrix> {
        if self.n > MATERIALIZE_LIMIT {
            return Err(HskError::Contract(format!(
                "refusing to materialize {0}x{0} Hessian (limit {1})",
                self.n, MATERIALIZE_LIMIT
            )));
        }
        let phi = self.phi.to_nalgebra();
        let h = &phi * phi.transpose();
        Ok(DenseMatrix::from_nalgebra(&h))
    }
}

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn from_unsorted(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_unstable_by(|a, b| b.total_cmp(a));
        Spectrum { eigenvalues }
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Eigenvalues of a symmetric matrix, descending.
///
/// Errors on non-square input or when the relative asymmetry exceeds 1e-12.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Spectrum> {
    if !a.is_square() {
        return Err(HskError::Contract(format!(
            "sym_eigenvalues requires a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let scale = a.max_abs();
    for i in 0..a.rows {
        for j in (i + 1)..a.cols {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 * scale.max(1e-300) {
                return Err(HskError::Contract(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    if a.rows == 0 {
        return Ok(Spectrum::from_unsorted(vec![]));
    }
    let eig = SymmetricEigen::new(a.to_nalgebra());
    Ok(Spectrum::from_unsorted(eig.eigenvalues.as_slice().to_vec()))
}

/// The `r` nonzero-candidate eigenvalues of `H = phi * phi^T`, computed on the
/// small Gram matrix `phi^T * phi`.
pub fn gram_spectrum(f: &GramFactor) -> Spectrum {
    let eig = SymmetricEigen::new(f.small_gram());
    Spectrum::from_unsorted(eig.eigenvalues.as_slice().to_vec())
}

/// Spectral norm of `H = phi * phi^T`.
pub fn spectral_norm(f: &GramFactor) -> f64 {
    gram_spectrum(f).max()
}

/// `(trace H, ||H||_F)` computed from the factor: the trace is `||phi||_F^2`
/// and the Frobenius norm is taken on the `r x r` Gram matrix.
pub fn trace_and_frobenius(f: &GramFactor) -> (f64, f64) {
    let trace: f64 = f.phi.data.iter().map(|x| x * x).sum();
    let gram = f.small_gram();
    let frob = gram.iter().map(|x| x * x).sum::<f64>().sqrt();
    (trace, frob)
}

/// Condition number `lambda_1 / lambda_last`, or `+inf` when the spectrum is
/// numerically singular at the given relative tolerance.
pub fn condition_number(s: &Spectrum, rank_tol: f64) -> f64 {
    let top = s.max();
    let bottom = s.min();
    if top <= 0.0 || bottom <= rank_tol * top {
        f64::INFINITY
    } else {
        top / bottom
    }
}

/// Number of eigenvalues at least `threshold * lambda_1`.
pub fn numerical_rank(s: &Spectrum, threshold: f64) -> usize {
    let top = s.max();
    if top <= 0.0 {
        return 0;
    }
    s.values().iter().filter(|&&x| x >= threshold * top).count()
}
