//! Smallest eigenpairs of a Hermitian-definite pencil `(S, M)`.
//!
//! Shift-invert block iteration with thick restart: the search space is
//! grown with `(S + cM)⁻¹ M x` applied to the current Ritz vectors and
//! Rayleigh–Ritz is done directly on `S`. `S + cM` is factored once as a
//! banded Cholesky; `c = 0` unless `S` turns out not to be positive definite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::linalg::{BandCholesky, BandMatrix, CsrMatrix};
use crate::scalar::{cx, czero, Cx, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    /// Bound on `‖Sx − EMx‖ / (|E| ‖Mx‖)`.
    pub tol: T,
    pub max_iter: usize,
    pub seed: u64,
    /// Fixed shift `c` for the factorization of `S + cM`; chosen
    /// automatically when `None`.
    pub shift: Option<T>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 500,
            seed: 0x5eed,
            shift: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// `M`-orthonormal.
    pub eigenvectors: Vec<Vec<Cx<T>>>,
    pub residuals: Vec<T>,
    pub iterations: usize,
    /// Shift used in the factorization.
    pub shift: T,
}

/// Problems at most this large are solved densely.
const DENSE_LIMIT: usize = 64;

pub fn solve_gevp<T: Real>(
    s: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    n_eig: usize,
    opts: &SolverOptions<T>,
) -> Result<EigenResult<T>> {
    let n = s.n();
    if m.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.n(),
        });
    }
    if n_eig == 0 || n_eig > n {
        return Err(Error::InvalidArgument(format!(
            "requested {n_eig} eigenpairs of a problem of size {n}"
        )));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if n <= DENSE_LIMIT {
        return solve_dense(s, m, n_eig);
    }
    let (chol, shift) = factor_with_shift(s, m, opts.shift)?;
    Iteration::new(s, m, &chol, n_eig, opts).run(shift)
}

fn factor_shifted<T: Real>(
    s: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    c: T,
) -> std::result::Result<BandCholesky<T>, (usize, f64)> {
    let n = s.n();
    let p = s.pattern();
    let bw = p.bandwidth().max(m.pattern().bandwidth()).min(n.saturating_sub(1));
    let mut band = BandMatrix::zeros(n, bw);
    for i in 0..n {
        for k in p.row(i) {
            let j = p.col(k);
            if j <= i {
                band.add(i, j, s.values()[k]);
            }
        }
        if c != T::zero() {
            let mp = m.pattern();
            for k in mp.row(i) {
                let j = mp.col(k);
                if j <= i {
                    band.add(i, j, m.values()[k] * c);
                }
            }
        }
    }
    band.factorize()
}

/// Factors `S + cM`, starting from `c = 0` and growing `c` until the
/// factorization succeeds.
fn factor_with_shift<T: Real>(s: &CsrMatrix<T>, m: &CsrMatrix<T>, fixed: Option<T>) -> Result<(BandCholesky<T>, T)> {
    if let Some(c) = fixed {
        return factor_shifted(s, m, c)
            .map(|f| (f, c))
            .map_err(|(row, pivot)| Error::NotPositiveDefinite { row, pivot });
    }
    let n = s.n();
    let ratio: T = (0..n).map(|i| (s.get(i, i).re / m.get(i, i).re).abs()).sum::<T>() / T::from_usize_lossy(n);
    let mut c = T::zero();
    let mut last = (0, 0.0);
    for attempt in 0..10 {
        match factor_shifted(s, m, c) {
            Ok(f) => return Ok((f, c)),
            Err(e) => last = e,
        }
        c = ratio * T::lit(1e-4) * T::lit(10f64.powi(attempt));
    }
    Err(Error::NotPositiveDefinite {
        row: last.0,
        pivot: last.1,
    })
}

/// Dense reference path: Cholesky of `M`, then Jacobi on `L⁻¹ S L⁻ᴴ`.
pub fn solve_dense<T: Real>(s: &CsrMatrix<T>, m: &CsrMatrix<T>, n_eig: usize) -> Result<EigenResult<T>> {
    let n = s.n();
    let mut l = m.to_dense();
    if !dense::cholesky_in_place(&mut l, n) {
        return Err(Error::NotPositiveDefinite {
            row: 0,
            pivot: f64::NAN,
        });
    }
    // C = L⁻¹ S L⁻ᴴ: solve L X = S, then L Cᴴ = Xᴴ.
    let mut x = s.to_dense();
    dense::forward_substitute(&l, n, &mut x, n);
    let mut xt: Vec<Cx<T>> = (0..n * n).map(|k| x[(k % n) * n + k / n].conj()).collect();
    dense::forward_substitute(&l, n, &mut xt, n);
    let c: Vec<Cx<T>> = (0..n * n).map(|k| xt[(k % n) * n + k / n].conj()).collect();
    let (vals, vecs) = dense::hermitian_eigen(&c, n);
    // Back-transform y ↦ L⁻ᴴ y.
    let mut y: Vec<Cx<T>> = vec![czero(); n * n_eig];
    for i in 0..n {
        for j in 0..n_eig {
            y[i * n_eig + j] = vecs[i * n + j];
        }
    }
    dense::backward_substitute_adjoint(&l, n, &mut y, n_eig);
    let eigenvectors: Vec<Vec<Cx<T>>> = (0..n_eig).map(|j| (0..n).map(|i| y[i * n_eig + j]).collect()).collect();
    let residuals = eigenvectors
        .iter()
        .zip(&vals)
        .map(|(v, &e)| relative_residual(s, m, v, e))
        .collect();
    Ok(EigenResult {
        eigenvalues: vals[..n_eig].to_vec(),
        eigenvectors,
        residuals,
        iterations: 1,
        shift: T::zero(),
    })
}

/// `‖Sx − EMx‖ / (max(|E|, 1) ‖Mx‖)`.
pub fn relative_residual<T: Real>(s: &CsrMatrix<T>, m: &CsrMatrix<T>, x: &[Cx<T>], e: T) -> T {
    let sx = s.mul_vec(x);
    let mx = m.mul_vec(x);
    residual_from_products(&sx, &mx, e)
}

fn residual_from_products<T: Real>(sx: &[Cx<T>], mx: &[Cx<T>], e: T) -> T {
    let mut r2 = T::zero();
    let mut m2 = T::zero();
    for (a, b) in sx.iter().zip(mx) {
        r2 = r2 + (*a - *b * e).norm_sqr();
        m2 = m2 + b.norm_sqr();
    }
    r2.sqrt() / (e.abs().max(T::one()) * m2.sqrt())
}

/// Row-major `n × cols` block of vectors.
#[derive(Debug, Clone)]
struct Blk<T> {
    n: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> Blk<T> {
    fn zeros(n: usize, cols: usize) -> Self {
        Self {
            n,
            cols,
            data: vec![czero(); n * cols],
        }
    }

    fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn column(&self, c: usize) -> Vec<Cx<T>> {
        (0..self.n).map(|i| self.data[i * self.cols + c]).collect()
    }

    fn select(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, cols.len());
        for i in 0..self.n {
            for (o, &c) in cols.iter().enumerate() {
                out.data[i * out.cols + o] = self.data[i * self.cols + c];
            }
        }
        out
    }
}

/// `Aᴴ B` for blocks with `a_cols` leading columns of `a` used.
fn gram_blocks<T: Real>(a: &[Cx<T>], a_stride: usize, a_cols: usize, b: &Blk<T>) -> Vec<Cx<T>> {
    let nb = b.cols;
    let mut out = vec![czero(); a_cols * nb];
    for i in 0..b.n {
        let ar = &a[i * a_stride..i * a_stride + a_cols];
        let br = b.row(i);
        for (r, av) in ar.iter().enumerate() {
            let ac = av.conj();
            for (o, bv) in out[r * nb..(r + 1) * nb].iter_mut().zip(br) {
                *o = *o + ac * *bv;
            }
        }
    }
    out
}

/// `A C` where `A` has `a_cols` leading columns used and `C` is `a_cols × nc`.
fn combine_rows<T: Real>(a: &[Cx<T>], a_stride: usize, a_cols: usize, n: usize, c: &[Cx<T>], nc: usize) -> Blk<T> {
    let mut out = Blk::zeros(n, nc);
    for i in 0..n {
        let ar = &a[i * a_stride..i * a_stride + a_cols];
        let orow = &mut out.data[i * nc..(i + 1) * nc];
        for (r, av) in ar.iter().enumerate() {
            if *av == czero() {
                continue;
            }
            for (o, cv) in orow.iter_mut().zip(&c[r * nc..(r + 1) * nc]) {
                *o = *o + *av * *cv;
            }
        }
    }
    out
}

struct Iteration<'a, T> {
    s: &'a CsrMatrix<T>,
    m: &'a CsrMatrix<T>,
    chol: &'a BandCholesky<T>,
    n_eig: usize,
    keep: usize,
    guard: usize,
    cap: usize,
    opts: &'a SolverOptions<T>,
    /// Basis, `M`-orthonormal, row-major with stride `cap`.
    v: Vec<Cx<T>>,
    dim: usize,
    /// `Vᴴ S V`, row-major with stride `cap`.
    h: Vec<Cx<T>>,
}

impl<'a, T: Real> Iteration<'a, T> {
    fn new(
        s: &'a CsrMatrix<T>,
        m: &'a CsrMatrix<T>,
        chol: &'a BandCholesky<T>,
        n_eig: usize,
        opts: &'a SolverOptions<T>,
    ) -> Self {
        let n = s.n();
        let keep = (2 * n_eig).max(n_eig + 8).min(n / 2);
        let guard = 8.min(keep - n_eig.min(keep));
        let cap = (keep + n_eig + guard).min(n);
        Self {
            s,
            m,
            chol,
            n_eig,
            keep,
            guard,
            cap,
            opts,
            v: vec![czero(); n * cap],
            dim: 0,
            h: vec![czero(); cap * cap],
        }
    }

    fn n(&self) -> usize {
        self.s.n()
    }

    /// `(S + cM)⁻¹ M X`.
    fn apply_op(&self, x: &Blk<T>) -> Blk<T> {
        let mut data = self.m.mul_block(&x.data, x.cols);
        self.chol.solve_in_place(&mut data, x.cols);
        Blk {
            n: x.n,
            cols: x.cols,
            data,
        }
    }

    /// Removes the components along the current basis (`M` inner product).
    fn project_out(&self, t: &mut Blk<T>) {
        if self.dim == 0 {
            return;
        }
        let mt = Blk {
            n: t.n,
            cols: t.cols,
            data: self.m.mul_block(&t.data, t.cols),
        };
        let c = gram_blocks(&self.v, self.cap, self.dim, &mt);
        let vc = combine_rows(&self.v, self.cap, self.dim, t.n, &c, t.cols);
        for (a, b) in t.data.iter_mut().zip(&vc.data) {
            *a = *a - *b;
        }
    }

    /// `M`-orthonormalizes the columns of `t` among themselves through the
    /// eigen-decomposition of their Gram matrix, dropping directions whose
    /// weight falls below `drop` relative to the largest.
    fn svqb(&self, t: &Blk<T>, drop: T) -> Blk<T> {
        let nb = t.cols;
        let mt = Blk {
            n: t.n,
            cols: nb,
            data: self.m.mul_block(&t.data, nb),
        };
        let g = gram_blocks(&t.data, nb, nb, &mt);
        let (vals, vecs) = dense::hermitian_eigen(&g, nb);
        let top = vals.last().copied().unwrap_or(T::zero());
        let kept: Vec<usize> = (0..nb)
            .filter(|&k| vals[k] > top * drop && vals[k] > T::zero())
            .collect();
        let mut c = vec![czero(); nb * kept.len()];
        for r in 0..nb {
            for (o, &k) in kept.iter().enumerate() {
                c[r * kept.len() + o] = vecs[r * nb + k] / vals[k].sqrt();
            }
        }
        combine_rows(&t.data, nb, nb, t.n, &c, kept.len())
    }

    /// Orthogonalizes `new` against the basis and itself, then appends it
    /// and the matching block of `H`.
    fn extend_basis(&mut self, mut t: Blk<T>) -> usize {
        let room = self.cap - self.dim;
        for pass in 0..2 {
            self.project_out(&mut t);
            // Directions that were mostly removed by the projection are
            // dropped on the first pass and cleaned on the second.
            let drop = if pass == 0 {
                T::epsilon() * T::lit(1e4)
            } else {
                T::epsilon() * T::lit(1e2)
            };
            t = self.svqb(&t, drop);
            if t.cols == 0 {
                return 0;
            }
        }
        if t.cols > room {
            t = t.select(&(t.cols - room..t.cols).collect::<Vec<_>>());
        }
        let nb = t.cols;
        let st = Blk {
            n: t.n,
            cols: nb,
            data: self.s.mul_block(&t.data, nb),
        };
        let cross = gram_blocks(&self.v, self.cap, self.dim, &st);
        let inner = gram_blocks(&t.data, nb, nb, &st);
        let d = self.dim;
        for r in 0..d {
            for c in 0..nb {
                self.h[r * self.cap + d + c] = cross[r * nb + c];
                self.h[(d + c) * self.cap + r] = cross[r * nb + c].conj();
            }
        }
        for r in 0..nb {
            for c in 0..nb {
                let z = if r == c {
                    cx(inner[r * nb + c].re, T::zero())
                } else {
                    (inner[r * nb + c] + inner[c * nb + r].conj()) * T::lit(0.5)
                };
                self.h[(d + r) * self.cap + d + c] = z;
            }
        }
        for i in 0..self.n() {
            let dst = &mut self.v[i * self.cap + d..i * self.cap + d + nb];
            dst.copy_from_slice(t.row(i));
        }
        self.dim += nb;
        nb
    }

    fn run(mut self, shift: T) -> Result<EigenResult<T>> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let mut start = Blk::zeros(n, self.keep);
        for z in start.data.iter_mut() {
            let (re, im): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *z = cx(T::lit(re), T::lit(im));
        }
        let start = self.apply_op(&start);
        self.extend_basis(start);
        let mut worst = T::infinity();
        for iter in 1..=self.opts.max_iter {
            let dim = self.dim;
            let mut flat = vec![czero(); dim * dim];
            for r in 0..dim {
                flat[r * dim..(r + 1) * dim].copy_from_slice(&self.h[r * self.cap..r * self.cap + dim]);
            }
            let (theta, y) = dense::hermitian_eigen(&flat, dim);
            let wanted = (self.n_eig + self.guard).min(dim);
            let restart_cols = self.keep.min(dim);
            let ncols = wanted.max(restart_cols);
            let mut yc = vec![czero(); dim * ncols];
            for r in 0..dim {
                yc[r * ncols..(r + 1) * ncols].copy_from_slice(&y[r * dim..r * dim + ncols]);
            }
            let x = combine_rows(&self.v, self.cap, dim, n, &yc, ncols);
            let xw = x.select(&(0..wanted).collect::<Vec<_>>());
            let sx = self.s.mul_block(&xw.data, wanted);
            let mx = self.m.mul_block(&xw.data, wanted);
            let residuals: Vec<T> = (0..wanted)
                .map(|c| {
                    let mut r2 = T::zero();
                    let mut m2 = T::zero();
                    for i in 0..n {
                        let a = sx[i * wanted + c];
                        let b = mx[i * wanted + c];
                        r2 = r2 + (a - b * theta[c]).norm_sqr();
                        m2 = m2 + b.norm_sqr();
                    }
                    r2.sqrt() / (theta[c].abs().max(T::one()) * m2.sqrt())
                })
                .collect();
            worst = residuals[..self.n_eig].iter().copied().fold(T::zero(), T::max);
            if worst < self.opts.tol {
                return Ok(EigenResult {
                    eigenvalues: theta[..self.n_eig].to_vec(),
                    eigenvectors: (0..self.n_eig).map(|c| xw.column(c)).collect(),
                    residuals: residuals[..self.n_eig].to_vec(),
                    iterations: iter,
                    shift,
                });
            }
            let expand: Vec<usize> = (0..wanted)
                .filter(|&c| c >= self.n_eig || residuals[c] >= self.opts.tol)
                .collect();
            if dim + expand.len() > self.cap {
                // Thick restart on the leading Ritz vectors.
                for i in 0..n {
                    let src = &x.data[i * ncols..i * ncols + restart_cols];
                    self.v[i * self.cap..i * self.cap + restart_cols].copy_from_slice(src);
                }
                self.h.iter_mut().for_each(|z| *z = czero());
                for (c, th) in theta.iter().enumerate().take(restart_cols) {
                    self.h[c * self.cap + c] = cx(*th, T::zero());
                }
                self.dim = restart_cols;
            }
            let new = self.apply_op(&x.select(&expand));
            if self.extend_basis(new) == 0 {
                break;
            }
        }
        Err(Error::NoConvergence {
            iterations: self.opts.max_iter,
            worst_residual: worst.to_f64_lossy(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, bloch_stiffness};
    use crate::linalg::dense::dot;
    use crate::material::{BulkSpec, DomainWallSpec, PerturbationSpec};
    use crate::mesh::{build_dof_map, build_mesh};

    fn unit_problem(n: usize, l: usize) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let spec = DomainWallSpec::new(BulkSpec::isotropic(1.0, 0.0), PerturbationSpec::PBreaking, 0.0, 1.0).unwrap();
        let mesh = build_mesh(n, l).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &spec, 4).unwrap();
        (bloch_stiffness(&ms, 0.0).s, ms.m_mass)
    }

    #[test]
    fn identity_pencil() {
        let id = CsrMatrix::<f64>::identity(10);
        let r = solve_gevp(&id, &id, 3, &SolverOptions::default()).unwrap();
        assert_eq!(r.eigenvalues.len(), 3);
        assert!(r.eigenvalues.iter().all(|e| (e - 1.0).abs() < 1e-14));
        assert!(r.residuals.iter().all(|r| *r < 1e-14));
        let big = CsrMatrix::<f64>::identity(200);
        let r = solve_gevp(&big, &big, 3, &SolverOptions::default()).unwrap();
        assert!(r.eigenvalues.iter().all(|e| (e - 1.0).abs() < 1e-12));
    }

    /// Generalized eigenvalues through nalgebra: `L⁻¹ S L⁻ᴴ` with `M = L Lᴴ`.
    fn nalgebra_eigenvalues(s: &CsrMatrix<f64>, m: &CsrMatrix<f64>) -> Vec<f64> {
        use nalgebra::{Complex, DMatrix};
        let n = s.n();
        let to_na = |a: &CsrMatrix<f64>| {
            let d = a.to_dense();
            DMatrix::from_fn(n, n, |i, j| Complex::new(d[i * n + j].re, d[i * n + j].im))
        };
        let l = to_na(m).cholesky().unwrap().l();
        let linv = l.clone().try_inverse().unwrap();
        let c = &linv * to_na(s) * linv.adjoint();
        let c = (&c + c.adjoint()) * Complex::new(0.5, 0.0);
        let mut vals: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    #[test]
    fn iterative_matches_dense_on_unit_weight() {
        let (s, m) = unit_problem(16, 2);
        let it = solve_gevp(&s, &m, 6, &SolverOptions::default()).unwrap();
        let reference = nalgebra_eigenvalues(&s, &m);
        for (a, b) in it.eigenvalues.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10 * b.abs(), "{a} vs {b}");
        }
        for i in 0..6 {
            for j in 0..6 {
                let g = dot(&it.eigenvectors[i], &m.mul_vec(&it.eigenvectors[j]));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - cx(expect, 0.0)).norm() < 1e-10);
            }
        }
        assert!(it.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dense_path_matches_nalgebra() {
        let (s, m) = unit_problem(4, 1);
        let d = solve_dense(&s, &m, 5).unwrap();
        let reference = nalgebra_eigenvalues(&s, &m);
        for (a, b) in d.eigenvalues.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10 * b.abs());
        }
        assert!(d.residuals.iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn same_seed_same_answer() {
        let (s, m) = unit_problem(8, 1);
        let a = solve_gevp(&s, &m, 4, &SolverOptions::default()).unwrap();
        let b = solve_gevp(&s, &m, 4, &SolverOptions::default()).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }

    #[test]
    fn bad_requests_are_rejected() {
        let id = CsrMatrix::<f64>::identity(5);
        assert!(solve_gevp(&id, &id, 0, &SolverOptions::default()).is_err());
        assert!(solve_gevp(&id, &id, 6, &SolverOptions::default()).is_err());
        let other = CsrMatrix::<f64>::identity(4);
        assert!(solve_gevp(&id, &other, 1, &SolverOptions::default()).is_err());
    }

    #[test]
    fn indefinite_stiffness_falls_back_to_a_shift() {
        let (s, m) = unit_problem(8, 1);
        // S − 2M has its lowest eigenvalues shifted below zero.
        let shifted = s.axpy(cx(-2.0 * 1e2, 0.0), &m);
        let base = solve_gevp(&s, &m, 4, &SolverOptions::default()).unwrap();
        let r = solve_gevp(&shifted, &m, 4, &SolverOptions::default()).unwrap();
        assert!(r.shift > 0.0);
        for (a, b) in r.eigenvalues.iter().zip(&base.eigenvalues) {
            assert!((a - (b - 200.0)).abs() < 1e-8 * b.abs());
        }
    }
}
