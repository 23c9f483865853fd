use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-column storage of the lower triangle of a symmetric matrix.
///
/// Column `j` lists rows `i >= j` in increasing order, diagonal first when
/// present. The pattern is reference counted so that matrices assembled on
/// the same structure (every `Q(theta)` on one mesh, say) share it, and a
/// symbolic factorization keyed on the pattern can be reused.
#[derive(Clone, Debug)]
pub struct SparseSymMatrix {
    dim: usize,
    col_ptr: Arc<[usize]>,
    row_idx: Arc<[usize]>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assembles from coordinate triplets. Entries from either triangle are
    /// folded into the lower one and duplicates are summed. Explicit zeros are
    /// kept as structural entries.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        let mut lower: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::InvalidMatrix(format!("entry ({r}, {c}) out of bounds for dimension {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidMatrix(format!("entry ({r}, {c}) is not finite")));
            }
            let (i, j) = if r >= c { (r, c) } else { (c, r) };
            lower.push((i, j, v));
        }
        lower.sort_unstable_by_key(|&(r, c, _)| (c, r));

        let mut col_ptr = vec![0usize; dim + 1];
        let mut row_idx = Vec::with_capacity(lower.len());
        let mut values: Vec<f64> = Vec::with_capacity(lower.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in lower {
            if last == Some((i, j)) {
                *values.last_mut().expect("nonempty") += v;
                continue;
            }
            last = Some((i, j));
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
        }
        for j in 0..dim {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self { dim, col_ptr: col_ptr.into(), row_idx: row_idx.into(), values })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self {
            dim,
            col_ptr: (0..=dim).collect::<Vec<_>>().into(),
            row_idx: (0..dim).collect::<Vec<_>>().into(),
            values: diag.to_vec(),
        }
    }

    /// Reuses this matrix's pattern with a new value array.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
                context: "SparseSymMatrix::with_values",
            });
        }
        Ok(Self { dim: self.dim, col_ptr: Arc::clone(&self.col_ptr), row_idx: Arc::clone(&self.row_idx), values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored entries of the lower triangle, including explicit zeros.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.col_ptr, &other.col_ptr) && Arc::ptr_eq(&self.row_idx, &other.row_idx) {
            return true;
        }
        self.dim == other.dim && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }

    /// Index into `values()` of logical entry `(i, j)`, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c >= self.dim {
            return None;
        }
        let start = self.col_ptr[c];
        let end = self.col_ptr[c + 1];
        self.row_idx[start..end].binary_search(&r).ok().map(|off| start + off)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|j| self.get(j, j)).collect()
    }

    /// Iterates the stored lower-triangle entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j, self.values[p]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context: "SparseSymMatrix::mul_vec",
            });
        }
        let mut y = vec![0.0; self.dim];
        for j in 0..self.dim {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        Ok(y)
    }

    /// `x' Q x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let qx = self.mul_vec(x)?;
        Ok(qx.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Builds a matrix whose pattern is the union of both patterns, returning
    /// it together with the positions of each input's entries in the result.
    pub fn union_pattern(&self, other: &Self) -> Result<(Self, Vec<usize>, Vec<usize>)> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
                context: "SparseSymMatrix::union_pattern",
            });
        }
        let triplets: Vec<_> =
            self.iter().map(|(i, j, _)| (i, j, 0.0)).chain(other.iter().map(|(i, j, _)| (i, j, 0.0))).collect();
        let union = Self::from_triplets(self.dim, &triplets)?;
        let map = |m: &Self| -> Vec<usize> {
            m.iter().map(|(i, j, _)| union.position(i, j).expect("union contains entry")).collect()
        };
        let (a, b) = (map(self), map(other));
        Ok((union, a, b))
    }
}
