//! Complex CSR matrices over a shared structurally symmetric pattern.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use crate::scalar::{czero, Cx, Real};

/// Structurally symmetric sparsity pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `transpose[k]` is the slot holding `(j, i)` when slot `k` holds `(i, j)`.
    transpose: Vec<usize>,
}

impl CsrPattern {
    /// Pattern containing every `(i, j)` and `(j, i)` from `entries` plus the diagonal.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for (i, j) in entries {
            rows[i].insert(j);
            rows[j].insert(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in &rows {
            col_idx.extend(r.iter().copied());
            row_ptr.push(col_idx.len());
        }
        let mut pattern = Self {
            n,
            row_ptr,
            col_idx,
            transpose: Vec::new(),
        };
        let mut transpose = vec![0; pattern.col_idx.len()];
        for i in 0..n {
            for k in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
                let j = pattern.col_idx[k];
                transpose[k] = pattern.find(j, i).expect("pattern is symmetric");
            }
        }
        pattern.transpose = transpose;
        pattern
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k]
    }

    pub fn transpose_slot(&self, k: usize) -> usize {
        self.transpose[k]
    }

    /// Slot index of `(i, j)`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |k| (i, k)))
            .map(|(i, k)| i.abs_diff(self.col_idx[k]))
            .max()
            .unwrap_or(0)
    }
}

/// Complex sparse matrix sharing an [`CsrPattern`].
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    pattern: Arc<CsrPattern>,
    values: Vec<Cx<T>>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![czero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Arc::new(CsrPattern::from_entries(n, []));
        let mut m = Self::zeros(pattern);
        for v in &mut m.values {
            *v = Cx::new(T::one(), T::zero());
        }
        m
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[Cx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cx<T>] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        self.pattern.find(i, j).map_or_else(czero, |k| self.values[k])
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: Cx<T>) {
        let k = self.pattern.find(i, j).expect("entry outside pattern");
        self.values[k] = self.values[k] + v;
    }

    /// `Aᴴ` on the same pattern.
    pub fn adjoint(&self) -> Self {
        let values = (0..self.values.len())
            .map(|k| self.values[self.pattern.transpose[k]].conj())
            .collect();
        Self {
            pattern: self.pattern.clone(),
            values,
        }
    }

    /// `½(A + Aᴴ)`, Hermitian to the last bit.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let values = (0..self.values.len())
            .map(|k| (self.values[k] + self.values[self.pattern.transpose[k]].conj()) * half)
            .collect();
        Self {
            pattern: self.pattern.clone(),
            values,
        }
    }

    /// `max |A − Aᴴ|`.
    pub fn hermitian_defect(&self) -> T {
        (0..self.values.len())
            .map(|k| (self.values[k] - self.values[self.pattern.transpose[k]].conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// `self + s · other` over the same pattern.
    pub fn axpy(&self, s: Cx<T>, other: &Self) -> Self {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a + *b * s)
            .collect();
        Self {
            pattern: self.pattern.clone(),
            values,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate().take(p.n) {
            let mut re = T::zero();
            let mut im = T::zero();
            for k in p.row(i) {
                let a = self.values[k];
                let b = x[p.col_idx[k]];
                re = re + a.re * b.re - a.im * b.im;
                im = im + a.re * b.im + a.im * b.re;
            }
            *yi = Cx::new(re, im);
        }
    }

    /// `Y = A X` for row-major `n × cols` blocks.
    pub fn mul_block(&self, x: &[Cx<T>], cols: usize) -> Vec<Cx<T>> {
        let p = &*self.pattern;
        let mut y = vec![czero(); p.n * cols];
        for (i, yi) in y.chunks_exact_mut(cols.max(1)).enumerate().take(p.n) {
            for k in p.row(i) {
                let a = self.values[k];
                let j = p.col_idx[k];
                for (o, b) in yi.iter_mut().zip(&x[j * cols..(j + 1) * cols]) {
                    *o = *o + a * *b;
                }
            }
        }
        y
    }

    pub fn mul_vec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut y = vec![czero(); self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// `xᴴ A x`.
    pub fn quadratic_form(&self, x: &[Cx<T>]) -> Cx<T> {
        crate::linalg::dense::dot(x, &self.mul_vec(x))
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Cx<T>> {
        let n = self.n();
        let mut d = vec![czero(); n * n];
        for i in 0..n {
            for k in self.pattern.row(i) {
                d[i * n + self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    /// Coordinate text dump: one `row col re im` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n() {
            for k in self.pattern.row(i) {
                let v = self.values[k];
                writeln!(
                    out,
                    "{} {} {:e} {:e}",
                    i,
                    self.pattern.col_idx[k],
                    v.re.to_f64_lossy(),
                    v.im.to_f64_lossy()
                )?;
            }
        }
        Ok(())
    }
}
