//! Sparse real matrices in compressed-column storage.
//!
//! All Hamiltonian terms of the supported models are real symmetric, and the
//! one-sided observable factors are real (symmetric or antisymmetric), so the
//! value type is `f64` throughout. Matrices are immutable after construction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicate entries are summed in `build`.
#[derive(Debug, Clone)]
pub struct CooBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl CooBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows <= u32::MAX as usize && cols <= u32::MAX as usize);
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn square(dim: usize) -> Self {
        Self::new(dim, dim)
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        if value != 0.0 {
            self.entries.push((row as u32, col as u32, value));
        }
    }

    /// Push `value` at (row, col) and (col, row); the diagonal only once.
    pub fn push_sym(&mut self, row: usize, col: usize, value: f64) {
        self.push(row, col, value);
        if row != col {
            self.push(col, row, value);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        // Stable sort keeps duplicates in insertion order, so symmetric entry
        // pairs accumulate in the same order and sum to bitwise-equal values.
        self.entries
            .sort_by_key(|&(r, c, _)| ((c as u64) << 32) | r as u64);
        let mut counts = vec![0usize; self.cols + 1];
        let mut row_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut i = 0;
        while i < self.entries.len() {
            let (r, c, mut v) = self.entries[i];
            i += 1;
            while i < self.entries.len() && self.entries[i].0 == r && self.entries[i].1 == c {
                v += self.entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_idx.push(r);
                values.push(v);
                counts[c as usize + 1] += 1;
            }
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            col_ptr: counts,
            row_idx,
            values,
        }
    }

    pub fn build_hermitian(self) -> Result<SparseHermitian> {
        SparseHermitian::new(self.build())
    }
}

/// Immutable compressed-sparse-column matrix over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut b = CooBuilder::square(dim);
        for i in 0..dim {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&r, &v)| (r as usize, v))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.rows.min(self.cols);
        let mut d = vec![0.0; n];
        for c in 0..n {
            for (r, v) in self.col(c) {
                if r == c {
                    d[c] += v;
                }
            }
        }
        d
    }

    /// y = A x.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "sparse apply input",
                expected: self.cols,
                found: x.len(),
            });
        }
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "sparse apply output",
                expected: self.rows,
                found: y.len(),
            });
        }
        y.fill(0.0);
        for c in 0..self.cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k] as usize] += self.values[k] * xc;
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }

    /// Y = A X for a block of column vectors, parallelized over columns.
    pub fn apply_block(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "sparse block apply",
                expected: self.cols,
                found: x.nrows(),
            });
        }
        let mut y = DMatrix::zeros(self.rows, x.ncols());
        let rows = self.rows;
        let cols: Vec<Vec<f64>> = crate::util::par_map_indexed(x.ncols(), |j| {
            let mut yj = vec![0.0; rows];
            let xj = x.column(j);
            for c in 0..self.cols {
                let xc = xj[c];
                if xc == 0.0 {
                    continue;
                }
                for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                    yj[self.row_idx[k] as usize] += self.values[k] * xc;
                }
            }
            yj
        });
        for (j, yj) in cols.iter().enumerate() {
            y.column_mut(j).copy_from_slice(yj);
        }
        Ok(y)
    }

    /// Σ coeff_i · term_i, all terms sharing the same shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let (rows, cols) = match terms.first() {
            Some((_, t)) => (t.rows, t.cols),
            None => return Err(Error::Config("empty linear combination".into())),
        };
        for (_, t) in terms {
            if t.rows != rows || t.cols != cols {
                return Err(Error::DimensionMismatch {
                    context: "sparse linear combination",
                    expected: rows,
                    found: t.rows,
                });
            }
        }
        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut accum = vec![0.0f64; rows];
        let mut touched: Vec<u32> = Vec::new();
        for c in 0..cols {
            for &(coeff, t) in terms {
                if coeff == 0.0 {
                    continue;
                }
                for k in t.col_ptr[c]..t.col_ptr[c + 1] {
                    let r = t.row_idx[k];
                    if accum[r as usize] == 0.0 {
                        touched.push(r);
                    }
                    accum[r as usize] += coeff * t.values[k];
                }
            }
            touched.sort_unstable();
            for &r in &touched {
                let v = accum[r as usize];
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
                accum[r as usize] = 0.0;
            }
            touched.clear();
            col_ptr[c + 1] = values.len();
        }
        Ok(SparseMatrix {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            for (r, v) in self.col(c) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Exact structural Hermiticity check: every stored entry (i, j, v) must
    /// have a matching (j, i) entry with bitwise-equal value. Runs in
    /// O(nnz) by comparing against the transpose layout.
    pub fn is_hermitian(&self) -> std::result::Result<(), (usize, usize, f64)> {
        if self.rows != self.cols {
            return Err((self.rows, self.cols, f64::NAN));
        }
        // Counting-sort transpose; rows within each transposed column come
        // out sorted, matching the canonical CSC layout.
        let nnz = self.nnz();
        let mut t_ptr = vec![0usize; self.rows + 1];
        for &r in &self.row_idx {
            t_ptr[r as usize + 1] += 1;
        }
        for r in 0..self.rows {
            t_ptr[r + 1] += t_ptr[r];
        }
        let mut cursor = t_ptr.clone();
        let mut t_row = vec![0u32; nnz];
        let mut t_val = vec![0.0f64; nnz];
        for c in 0..self.cols {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k] as usize;
                t_row[cursor[r]] = c as u32;
                t_val[cursor[r]] = self.values[k];
                cursor[r] += 1;
            }
        }
        if t_ptr != self.col_ptr {
            // Structure differs; locate one offending entry for the report.
            for c in 0..self.cols {
                for (r, v) in self.col(c) {
                    if !self.col(r).any(|(rr, _)| rr == c) {
                        return Err((r, c, v));
                    }
                }
            }
        }
        for k in 0..nnz {
            if t_row[k] != self.row_idx[k] || t_val[k] != self.values[k] {
                let c = self.col_ptr.partition_point(|&p| p <= k) - 1;
                return Err((self.row_idx[k] as usize, c, self.values[k]));
            }
        }
        Ok(())
    }
}

/// A sparse matrix whose entry set is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian(SparseMatrix);

impl SparseHermitian {
    pub fn new(m: SparseMatrix) -> Result<Self> {
        m.is_hermitian()
            .map_err(|(row, col, value)| Error::NotHermitian { row, col, value })?;
        Ok(Self(m))
    }

    /// Skips the structural check; for matrices symmetric by construction.
    pub(crate) fn new_unchecked(m: SparseMatrix) -> Self {
        debug_assert!(m.is_hermitian().is_ok());
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn linear_combination(terms: &[(f64, &SparseHermitian)]) -> Result<SparseHermitian> {
        let general: Vec<(f64, &SparseMatrix)> = terms.iter().map(|&(c, t)| (c, &t.0)).collect();
        Ok(SparseHermitian::new_unchecked(
            SparseMatrix::linear_combination(&general)?,
        ))
    }
}

impl std::ops::Deref for SparseHermitian {
    type Target = SparseMatrix;
    fn deref(&self) -> &SparseMatrix {
        &self.0
    }
}
