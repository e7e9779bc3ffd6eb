//! Compressed sparse column storage and a left-looking sparse Cholesky.
//!
//! This is the literal joint-system route: all coalition blocks are assembled
//! into one sparse symmetric matrix and factored together. The factorization
//! knows nothing about the block structure; it discovers it through the
//! elimination tree.

use crate::linalg::NotPositiveDefinite;
use crate::scalar::Scalar;

/// Lower triangle (diagonal included) of a symmetric matrix in CSC form.
/// Row indices inside each column are strictly increasing and the diagonal
/// entry, when present, comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsc<T> {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

/// Incremental column-by-column builder for [`SymmetricCsc`].
#[derive(Debug)]
pub struct CscBuilder<T> {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CscBuilder<T> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            col_ptr: vec![0],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut b = Self::new(n);
        b.col_ptr.reserve(n);
        b.row_idx.reserve(nnz);
        b.values.reserve(nnz);
        b
    }

    /// Appends an entry to the current column. Rows must be pushed in
    /// increasing order and never above the diagonal.
    pub fn push(&mut self, row: usize, value: T) {
        let col = self.col_ptr.len() - 1;
        assert!(row >= col && row < self.n, "entry ({row}, {col}) outside the lower triangle");
        if self.row_idx.len() > self.col_ptr[col] {
            assert!(*self.row_idx.last().unwrap() < row, "rows must increase within a column");
        }
        self.row_idx.push(row);
        self.values.push(value);
    }

    /// Closes the current column.
    pub fn finish_column(&mut self) {
        assert!(self.col_ptr.len() <= self.n, "too many columns");
        self.col_ptr.push(self.row_idx.len());
    }

    pub fn build(self) -> SymmetricCsc<T> {
        assert_eq!(self.col_ptr.len(), self.n + 1, "not every column was finished");
        SymmetricCsc {
            n: self.n,
            col_ptr: self.col_ptr,
            row_idx: self.row_idx,
            values: self.values,
        }
    }
}

impl<T: Scalar> SymmetricCsc<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn column(&self, j: usize) -> (&[usize], &[T]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let (rows, vals) = self.column(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    /// Column-wise view of the strict upper triangle: for each column `k`, the
    /// rows `i < k` with a stored entry. Sorted ascending.
    fn upper_pattern(&self) -> (Vec<usize>, Vec<usize>) {
        let mut counts = vec![0usize; self.n + 1];
        for j in 0..self.n {
            for &i in self.column(j).0 {
                if i > j {
                    counts[i + 1] += 1;
                }
            }
        }
        for k in 0..self.n {
            counts[k + 1] += counts[k];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; counts[self.n]];
        for j in 0..self.n {
            for &i in self.column(j).0 {
                if i > j {
                    rows[next[i]] = j;
                    next[i] += 1;
                }
            }
        }
        (counts, rows)
    }
}

const NONE: usize = usize::MAX;

/// Elimination tree and the row/column patterns of `L`.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    parent: Vec<usize>,
    // Column pattern of L, diagonal first, rows ascending.
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    // Row pattern of L below the diagonal: columns k < i with L[i][k] != 0, ascending.
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
}

impl Symbolic {
    pub fn analyze<T: Scalar>(a: &SymmetricCsc<T>) -> Self {
        let n = a.n;
        let (up_ptr, up_rows) = a.upper_pattern();

        // Liu's elimination tree with path compression.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &start in &up_rows[up_ptr[k]..up_ptr[k + 1]] {
                let mut i = start;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // Row patterns via the elimination-tree reach of each row of A.
        let mut mark = vec![NONE; n];
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut row_cols = Vec::new();
        let mut col_counts = vec![1usize; n];
        for k in 0..n {
            mark[k] = k;
            let begin = row_cols.len();
            for &start in &up_rows[up_ptr[k]..up_ptr[k + 1]] {
                let mut i = start;
                while mark[i] != k {
                    mark[i] = k;
                    row_cols.push(i);
                    i = parent[i];
                    debug_assert!(i != NONE);
                }
            }
            row_cols[begin..].sort_unstable();
            for &c in &row_cols[begin..] {
                col_counts[c] += 1;
            }
            row_ptr.push(row_cols.len());
        }

        let mut l_col_ptr = Vec::with_capacity(n + 1);
        l_col_ptr.push(0);
        for &c in &col_counts {
            l_col_ptr.push(l_col_ptr.last().unwrap() + c);
        }
        let mut l_row_idx = vec![0usize; *l_col_ptr.last().unwrap()];
        let mut fill = l_col_ptr[..n].to_vec();
        for k in 0..n {
            l_row_idx[fill[k]] = k;
            fill[k] += 1;
        }
        for i in 0..n {
            for &c in &row_cols[row_ptr[i]..row_ptr[i + 1]] {
                l_row_idx[fill[c]] = i;
                fill[c] += 1;
            }
        }

        Self {
            n,
            parent,
            l_col_ptr,
            l_row_idx,
            row_ptr,
            row_cols,
        }
    }

    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_row_idx.len()
    }
}

/// Sparse lower-triangular factor `L` sharing the pattern of a [`Symbolic`].
#[derive(Debug, Clone)]
pub struct SparseCholesky<T> {
    symbolic: Symbolic,
    values: Vec<T>,
}

impl<T: Scalar> SparseCholesky<T> {
    pub fn factor(a: &SymmetricCsc<T>) -> Result<Self, NotPositiveDefinite> {
        Self::factor_with(Symbolic::analyze(a), a)
    }

    /// Left-looking numeric factorization on a precomputed pattern.
    pub fn factor_with(symbolic: Symbolic, a: &SymmetricCsc<T>) -> Result<Self, NotPositiveDefinite> {
        let n = symbolic.n;
        assert_eq!(a.n, n);
        let lp = &symbolic.l_col_ptr;
        let li = &symbolic.l_row_idx;
        let mut lx = vec![T::zero(); li.len()];
        let mut x = vec![T::zero(); n];
        // next[k]: position in column k of the first row not yet consumed.
        let mut next: Vec<usize> = lp[..n].to_vec();

        for j in 0..n {
            for &i in &li[lp[j]..lp[j + 1]] {
                x[i] = T::zero();
            }
            let (rows, vals) = a.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                x[i] = v;
            }
            for &k in &symbolic.row_cols[symbolic.row_ptr[j]..symbolic.row_ptr[j + 1]] {
                let pos = next[k];
                debug_assert_eq!(li[pos], j);
                let ljk = lx[pos];
                for p in pos..lp[k + 1] {
                    x[li[p]] -= lx[p] * ljk;
                }
                next[k] = pos + 1;
            }
            let d = x[j];
            if d <= T::zero() || !d.is_finite() {
                return Err(NotPositiveDefinite { pivot: j });
            }
            let ljj = d.sqrt();
            lx[lp[j]] = ljj;
            for p in lp[j] + 1..lp[j + 1] {
                lx[p] = x[li[p]] / ljj;
            }
            next[j] = lp[j] + 1;
        }
        Ok(Self { symbolic, values: lx })
    }

    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry `L[i][j]`, zero outside the pattern.
    pub fn factor_entry(&self, i: usize, j: usize) -> T {
        let r = self.symbolic.l_col_ptr[j]..self.symbolic.l_col_ptr[j + 1];
        match self.symbolic.l_row_idx[r.clone()].binary_search(&i) {
            Ok(p) => self.values[r.start + p],
            Err(_) => T::zero(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.symbolic.n;
        assert_eq!(b.len(), n);
        let lp = &self.symbolic.l_col_ptr;
        let li = &self.symbolic.l_row_idx;
        let lx = &self.values;
        for j in 0..n {
            let yj = b[j] / lx[lp[j]];
            b[j] = yj;
            for p in lp[j] + 1..lp[j + 1] {
                b[li[p]] -= lx[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for p in lp[j] + 1..lp[j + 1] {
                s -= lx[p] * b[li[p]];
            }
            b[j] = s / lx[lp[j]];
        }
    }
}
