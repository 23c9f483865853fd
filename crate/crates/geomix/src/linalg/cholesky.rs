//! Up-looking sparse Cholesky with a reusable symbolic analysis.
//!
//! The symbolic phase (ordering, elimination tree, row patterns of `L`) runs
//! once per sparsity pattern. Every numeric refactorization on the same
//! pattern only scatters values and runs the triangular updates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::ordering::{invert, minimum_degree};
use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Structure of `L` for one sparsity pattern of `Q`.
#[derive(Debug)]
pub struct SymbolicCholesky {
    dim: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    col_ptr: Arc<[usize]>,
    row_idx: Arc<[usize]>,
    /// For each stored entry of `Q`, its slot in the permuted upper matrix `C`.
    q_to_c: Vec<usize>,
    c_col_ptr: Vec<usize>,
    c_row_idx: Vec<usize>,
    /// Positions of the diagonal entries of `Q` in its value array.
    q_diag: Vec<Option<usize>>,
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    /// Nonzero pattern of each row of `L` (off-diagonal), in the topological
    /// order required by the up-looking update.
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
}

impl SymbolicCholesky {
    pub fn analyze(q: &SparseSymMatrix) -> Self {
        let perm = minimum_degree(q);
        Self::with_ordering(q, perm)
    }

    /// Symbolic analysis under a caller-supplied ordering (`perm[new] = old`).
    pub fn with_ordering(q: &SparseSymMatrix, perm: Vec<usize>) -> Self {
        let n = q.dim();
        assert_eq!(perm.len(), n, "ordering length must equal the dimension");
        let pinv = invert(&perm);

        // C = P Q P' stored as upper triangle by columns.
        let mut counts = vec![0usize; n + 1];
        let mut mapped = Vec::with_capacity(q.nnz());
        for (i, j, _) in q.iter() {
            let (a, b) = (pinv[i], pinv[j]);
            let (r, c) = if a <= b { (a, b) } else { (b, a) };
            counts[c + 1] += 1;
            mapped.push((r, c));
        }
        for c in 0..n {
            counts[c + 1] += counts[c];
        }
        let c_col_ptr = counts.clone();
        let mut next = counts;
        let mut c_row_idx = vec![0usize; mapped.len()];
        let mut q_to_c = vec![0usize; mapped.len()];
        for (e, &(r, c)) in mapped.iter().enumerate() {
            let slot = next[c];
            next[c] += 1;
            c_row_idx[slot] = r;
            q_to_c[e] = slot;
        }

        // Elimination tree of C.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for p in c_col_ptr[k]..c_col_ptr[k + 1] {
                let mut i = c_row_idx[p];
                while i != NONE && i < k {
                    let inext = ancestor[i];
                    ancestor[i] = k;
                    if inext == NONE {
                        parent[i] = k;
                    }
                    i = inext;
                }
            }
        }

        // Row patterns of L by walking row subtrees.
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut row_cols = Vec::new();
        let mut mark = vec![NONE; n];
        let mut stack = Vec::new();
        let mut l_counts = vec![1usize; n];
        let mut scratch = Vec::new();
        for k in 0..n {
            mark[k] = k;
            scratch.clear();
            for p in c_col_ptr[k]..c_col_ptr[k + 1] {
                let mut i = c_row_idx[p];
                if i > k {
                    continue;
                }
                stack.clear();
                while mark[i] != k {
                    stack.push(i);
                    mark[i] = k;
                    i = parent[i];
                }
                scratch.extend_from_slice(&stack);
            }
            // Parents always carry larger indices than their children, so
            // ascending order processes descendants first.
            scratch.sort_unstable();
            for &i in &scratch {
                l_counts[i] += 1;
            }
            row_cols.extend_from_slice(&scratch);
            row_ptr.push(row_cols.len());
        }

        let mut l_col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_col_ptr[j + 1] = l_col_ptr[j] + l_counts[j];
        }
        let mut l_row_idx = vec![0usize; l_col_ptr[n]];
        let mut fill = l_col_ptr.clone();
        for k in 0..n {
            l_row_idx[fill[k]] = k;
            fill[k] += 1;
            for &i in &row_cols[row_ptr[k]..row_ptr[k + 1]] {
                l_row_idx[fill[i]] = k;
                fill[i] += 1;
            }
        }
        // Diagonal was placed when k == j, which precedes all rows k > j, so
        // every column lists its diagonal first and rows in increasing order.

        let q_diag = (0..n).map(|j| q.position(j, j)).collect();

        Self {
            dim: n,
            perm,
            col_ptr: Arc::from(q.col_ptr()),
            row_idx: Arc::from(q.row_idx()),
            q_to_c,
            c_col_ptr,
            c_row_idx,
            q_diag,
            l_col_ptr,
            l_row_idx,
            row_ptr,
            row_cols,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Stored entries of `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.l_row_idx.len()
    }

    fn matches(&self, q: &SparseSymMatrix) -> bool {
        q.dim() == self.dim && *q.col_ptr() == *self.col_ptr && *q.row_idx() == *self.row_idx
    }

    /// Numeric factorization of a matrix with the analysed pattern, applying
    /// the jitter escalation on pivot failure.
    pub fn factorize(self: &Arc<Self>, q: &SparseSymMatrix) -> Result<CholFactor> {
        if !self.matches(q) {
            return Err(Error::InvalidMatrix("matrix pattern differs from the analysed pattern".into()));
        }
        let n = self.dim;
        let mut c_values = vec![0.0; self.c_row_idx.len()];
        for (e, &v) in q.values().iter().enumerate() {
            c_values[self.q_to_c[e]] = v;
        }
        let mean_diag = {
            let s: f64 = self.q_diag.iter().map(|d| d.map_or(0.0, |p| q.values()[p])).sum();
            s / n as f64
        };
        let mut work = NumericWork::new(self);
        let mut jitter = 0.0;
        loop {
            match work.run(self, &c_values, jitter) {
                Ok(values) => return Ok(CholFactor { symbolic: Arc::clone(self), values, jitter }),
                Err(pivot) => {
                    let next = if jitter == 0.0 { JITTER_START * mean_diag.abs() } else { jitter * 10.0 };
                    if !(next > 0.0) || next > JITTER_MAX * mean_diag.abs() * (1.0 + 1e-12) {
                        return Err(Error::NotPositiveDefinite { pivot, jitter });
                    }
                    jitter = next;
                }
            }
        }
    }
}

struct NumericWork {
    x: Vec<f64>,
    next: Vec<usize>,
}

impl NumericWork {
    fn new(s: &SymbolicCholesky) -> Self {
        Self { x: vec![0.0; s.dim], next: vec![0; s.dim] }
    }

    /// Returns the values of `L`, or the failing pivot index.
    fn run(&mut self, s: &SymbolicCholesky, c_values: &[f64], jitter: f64) -> std::result::Result<Vec<f64>, usize> {
        let n = s.dim;
        let mut lx = vec![0.0; s.l_row_idx.len()];
        let x = &mut self.x;
        let next = &mut self.next;
        next.copy_from_slice(&s.l_col_ptr[..n]);
        x.iter_mut().for_each(|v| *v = 0.0);

        for k in 0..n {
            for p in s.c_col_ptr[k]..s.c_col_ptr[k + 1] {
                x[s.c_row_idx[p]] = c_values[p];
            }
            let mut d = x[k] + jitter;
            x[k] = 0.0;
            for &i in &s.row_cols[s.row_ptr[k]..s.row_ptr[k + 1]] {
                let lki = x[i] / lx[s.l_col_ptr[i]];
                x[i] = 0.0;
                for p in s.l_col_ptr[i] + 1..next[i] {
                    x[s.l_row_idx[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                x.iter_mut().for_each(|v| *v = 0.0);
                return Err(s.perm[k]);
            }
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(lx)
    }
}

/// Numeric factor `P Q P' = L L'`.
#[derive(Clone, Debug)]
pub struct CholFactor {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
    jitter: f64,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.symbolic.dim
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// Diagonal shift that was needed to complete the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn permutation(&self) -> &[usize] {
        &self.symbolic.perm
    }

    /// `L` as `(row, col, value)` triplets in the permuted numbering.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let s = &self.symbolic;
        (0..s.dim)
            .flat_map(move |j| (s.l_col_ptr[j]..s.l_col_ptr[j + 1]).map(move |p| (s.l_row_idx[p], j, self.values[p])))
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.values[self.symbolic.l_col_ptr[j]]
    }

    fn forward(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in 0..s.dim {
            let start = s.l_col_ptr[j];
            y[j] /= self.values[start];
            let yj = y[j];
            for p in start + 1..s.l_col_ptr[j + 1] {
                y[s.l_row_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    fn backward(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for j in (0..s.dim).rev() {
            let start = s.l_col_ptr[j];
            let mut acc = y[j];
            for p in start + 1..s.l_col_ptr[j + 1] {
                acc -= self.values[p] * y[s.l_row_idx[p]];
            }
            y[j] = acc / self.values[start];
        }
    }

    /// Solves `Q x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len(), context: "CholFactor::solve" });
        }
        let perm = &self.symbolic.perm;
        let mut y: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        let mut x = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// `log |Q| = 2 sum log diag(L)`.
    pub fn log_det(&self) -> f64 {
        let s = &self.symbolic;
        2.0 * (0..s.dim).map(|j| self.values[s.l_col_ptr[j]].ln()).sum::<f64>()
    }

    /// `P' L^{-T} eps` for a given standard-normal vector `eps`.
    pub fn apply_inverse_transpose(&self, eps: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if eps.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: eps.len(),
                context: "CholFactor::apply_inverse_transpose",
            });
        }
        let mut u = eps.to_vec();
        self.backward(&mut u);
        let mut x = vec![0.0; n];
        for (new, &old) in self.symbolic.perm.iter().enumerate() {
            x[old] = u[new];
        }
        Ok(x)
    }

    /// Draws from `N(mean, Q^{-1})`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let n = self.dim();
        if mean.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: mean.len(), context: "CholFactor::sample" });
        }
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.apply_inverse_transpose(&eps)?;
        for (xi, m) in x.iter_mut().zip(mean) {
            *xi += m;
        }
        Ok(x)
    }
}

/// Fresh symbolic analysis plus numeric factorization.
pub fn cholesky(q: &SparseSymMatrix) -> Result<CholFactor> {
    let symbolic = Arc::new(SymbolicCholesky::analyze(q));
    symbolic.factorize(q)
}

pub fn solve(factor: &CholFactor, b: &[f64]) -> Result<Vec<f64>> {
    factor.solve(b)
}

pub fn log_det(factor: &CholFactor) -> f64 {
    factor.log_det()
}

pub fn sample_gmrf<R: Rng + ?Sized>(factor: &CholFactor, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    factor.sample(mean, rng)
}
