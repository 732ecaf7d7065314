//! Thin wrapper over faer's compressed-column storage and sparse LU.
//!
//! Matrices are built from triplet lists; duplicate entries are summed in
//! insertion order so assembly is bit-reproducible.

use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let trips: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &trips)
            .expect("triplet indices are in range by construction");
        Self { inner }
    }

    /// Diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let entries: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(values.len(), values.len(), &entries)
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    pub(crate) fn as_faer(&self) -> &SparseColMat<usize, f64> {
        &self.inner
    }

    /// Iterates stored entries column by column as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.inner.symbolic();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        let val = self.inner.val();
        (0..self.ncols()).flat_map(move |j| {
            (col_ptr[j]..col_ptr[j + 1]).map(move |k| (row_idx[k], j, val[k]))
        })
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let sym = self.inner.symbolic();
        let range = sym.col_ptr()[j]..sym.col_ptr()[j + 1];
        let rows = &sym.row_idx()[range.clone()];
        match rows.binary_search(&i) {
            Ok(k) => self.inner.val()[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`, accumulated in a fixed order.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "dimension mismatch in mul_vec");
        let mut y = vec![0.0; self.nrows()];
        for (i, j, v) in self.triplets() {
            y[i] += v * x[j];
        }
        y
    }

    /// `y = A^T x`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows(), "dimension mismatch in mul_vec_transpose");
        let mut y = vec![0.0; self.ncols()];
        for (i, j, v) in self.triplets() {
            y[j] += v * x[i];
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.triplets().map(|(i, j, v)| x[i] * v * y[j]).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.ncols()])
    }

    /// Largest entry-wise difference, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        let a = self.triplets().map(|(i, j, v)| (i, j, v - other.get(i, j)));
        let b = other.triplets().map(|(i, j, v)| (i, j, v - self.get(i, j)));
        a.chain(b).map(|(_, _, d)| d.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows().min(self.ncols())).map(|i| self.get(i, i)).collect()
    }
}

/// Builds a block matrix from `(row_offset, col_offset, scale, block)` parts.
pub fn block_matrix(
    nrows: usize,
    ncols: usize,
    blocks: &[(usize, usize, f64, &SparseMatrix)],
) -> SparseMatrix {
    let cap = blocks.iter().map(|b| b.3.nnz()).sum();
    let mut entries = Vec::with_capacity(cap);
    for &(r0, c0, s, m) in blocks {
        entries.extend(m.triplets().map(|(i, j, v)| (r0 + i, c0 + j, s * v)));
    }
    SparseMatrix::from_triplets(nrows, ncols, &entries)
}

/// Sparse LU with partial pivoting. The symbolic analysis can be reused for
/// matrices sharing a sparsity pattern.
pub struct SparseLu {
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let symbolic = Self::analyze(a)?;
        Self::factor_with(symbolic, a)
    }

    pub fn analyze(a: &SparseMatrix) -> Result<SymbolicLu<usize>> {
        SymbolicLu::try_new(a.as_faer().symbolic())
            .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))
    }

    pub fn factor_with(symbolic: SymbolicLu<usize>, a: &SparseMatrix) -> Result<Self> {
        let lu = Lu::try_new_with_symbolic(symbolic, a.as_faer().as_ref())
            .map_err(|e| Error::LinearSolve(format!("numeric LU: {e:?}")))?;
        Ok(Self { lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        use faer::linalg::solvers::SolveCore;
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu
            .solve_in_place_with_conj(faer::Conj::No, b.as_mut());
        let x: Vec<f64> = (0..rhs.len()).map(|i| b[(i, 0)]).collect();
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::LinearSolve("non-finite solution (singular matrix?)".into()))
        }
    }
}

/// One-shot factor-and-solve.
pub fn solve(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    SparseLu::factor(a)?.solve(rhs)
}
