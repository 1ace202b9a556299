//! Hermitian band Cholesky `A = L Lᴴ` with multi right-hand-side solves.

use crate::scalar::{cx, czero, Cx, Real};

/// Lower band of a Hermitian matrix, row-major: row `i` stores columns
/// `i - bw ..= i` at offsets `0 ..= bw`.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    bw: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![czero(); n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Entry `(i, j)` for `j ≤ i`.
    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        self.data[self.idx(i, j)]
    }

    /// Adds `v` to the lower-triangle entry `(i, j)`, `j ≤ i`.
    pub fn add(&mut self, i: usize, j: usize, v: Cx<T>) {
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    /// Factorizes in place. On failure returns the offending row and pivot.
    pub fn factorize(mut self) -> Result<BandCholesky<T>, (usize, f64)> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                // s = A[i][j] - Σ_{k < j} L[i][k] conj(L[j][k])
                let k0 = i0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let mut re = T::zero();
                let mut im = T::zero();
                for k in k0..j {
                    let a = self.data[ri + k];
                    let b = self.data[rj + k];
                    re = re + a.re * b.re + a.im * b.im;
                    im = im + a.im * b.re - a.re * b.im;
                }
                let s = self.data[ri + j] - cx(re, im);
                if j == i {
                    let d = s.re;
                    if !(d > T::zero()) || !d.is_finite() {
                        return Err((i, d.to_f64_lossy()));
                    }
                    self.data[ri + i] = cx(d.sqrt(), T::zero());
                } else {
                    let d = self.data[rj + j].re;
                    self.data[ri + j] = s / d;
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

/// Factor produced by [`BandMatrix::factorize`].
#[derive(Debug, Clone)]
pub struct BandCholesky<T> {
    l: BandMatrix<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn n(&self) -> usize {
        self.l.n
    }

    /// Overwrites the row-major `n × r` block `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [Cx<T>], r: usize) {
        let (n, bw) = (self.l.n, self.l.bw);
        assert_eq!(b.len(), n * r);
        let w = bw + 1;
        let l = &self.l.data;
        for i in 0..n {
            let ri = i * w + bw - i;
            let (head, tail) = b.split_at_mut(i * r);
            let bi = &mut tail[..r];
            for k in i.saturating_sub(bw)..i {
                let lik = l[ri + k];
                if lik.re == T::zero() && lik.im == T::zero() {
                    continue;
                }
                let bk = &head[k * r..(k + 1) * r];
                for (x, y) in bi.iter_mut().zip(bk) {
                    *x = *x - lik * *y;
                }
            }
            let d = T::one() / l[ri + i].re;
            for x in bi.iter_mut() {
                *x = *x * d;
            }
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            let d = T::one() / l[ri + i].re;
            let (head, tail) = b.split_at_mut(i * r);
            let bi = &mut tail[..r];
            for x in bi.iter_mut() {
                *x = *x * d;
            }
            for k in i.saturating_sub(bw)..i {
                let lc = l[ri + k].conj();
                if lc.re == T::zero() && lc.im == T::zero() {
                    continue;
                }
                let bk = &mut head[k * r..(k + 1) * r];
                for (y, x) in bk.iter_mut().zip(bi.iter()) {
                    *y = *y - lc * *x;
                }
            }
        }
    }
}
