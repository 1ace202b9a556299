//! Small dense kernels: Hermitian Jacobi eigensolver, Cholesky, Householder
//! least squares. Matrices are row-major slices.

use num_complex::Complex;

use crate::scalar::{cx, czero, Cx, Real};

/// Eigen-decomposition of a Hermitian `n × n` matrix by cyclic Jacobi.
///
/// Returns eigenvalues in ascending order and the eigenvectors as the
/// columns of a row-major `n × n` unitary matrix. Only the upper triangle
/// of `a` is read.
pub fn hermitian_eigen<T: Real>(a: &[Cx<T>], n: usize) -> (Vec<T>, Vec<Cx<T>>) {
    assert_eq!(a.len(), n * n);
    let mut m = vec![czero::<T>(); n * n];
    for i in 0..n {
        m[i * n + i] = cx(a[i * n + i].re, T::zero());
        for j in i + 1..n {
            m[i * n + j] = a[i * n + j];
            m[j * n + i] = a[i * n + j].conj();
        }
    }
    let mut v = vec![czero::<T>(); n * n];
    for i in 0..n {
        v[i * n + i] = cx(T::one(), T::zero());
    }
    let frob: T = m.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let tiny = T::epsilon() * T::epsilon() * frob.max(T::min_positive_value());
    for _sweep in 0..60 {
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].norm_sqr())
            .sum::<T>()
            .sqrt();
        if off <= T::epsilon() * frob || off <= tiny {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                let r = apq.norm();
                if r <= tiny {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                // Phase so that the pivot becomes real: a_pq = r e^{iφ}.
                let phase = apq / cx(r, T::zero());
                let theta = (aqq - app) / (T::lit(2.0) * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let ep = phase.conj(); // e^{-iφ}
                                       // U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on the (p, q) plane.
                let u_pp = cx(c, T::zero());
                let u_pq = cx(s, T::zero());
                let u_qp = ep * (-s);
                let u_qq = ep * c;
                // Columns: M ← M U.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = mkp * u_pp + mkq * u_qp;
                    m[k * n + q] = mkp * u_pq + mkq * u_qq;
                }
                // Rows: M ← Uᴴ M.
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = u_pp.conj() * mpk + u_qp.conj() * mqk;
                    m[q * n + k] = u_pq.conj() * mpk + u_qq.conj() * mqk;
                }
                m[p * n + q] = czero();
                m[q * n + p] = czero();
                m[p * n + p].im = T::zero();
                m[q * n + q].im = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * u_pp + vkq * u_qp;
                    v[k * n + q] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m[x * n + x]
            .re
            .partial_cmp(&m[y * n + y].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&k| m[k * n + k].re).collect();
    let mut vecs = vec![czero::<T>(); n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

/// Real symmetric variant of [`hermitian_eigen`].
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let ac: Vec<Cx<T>> = a.iter().map(|&x| cx(x, T::zero())).collect();
    let (vals, vecs) = hermitian_eigen(&ac, n);
    (vals, vecs.into_iter().map(|z| z.re).collect())
}

/// In-place Cholesky `A = L Lᴴ` of a Hermitian positive definite matrix;
/// the lower triangle of `a` receives `L`. Returns `false` on breakdown.
pub fn cholesky_in_place<T: Real>(a: &mut [Cx<T>], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d = d - a[j * n + k].norm_sqr();
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = cx(d, T::zero());
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = czero();
        }
    }
    true
}

/// Solves `L X = B` in place for lower-triangular `L` (`B` is `n × r`).
pub fn forward_substitute<T: Real>(l: &[Cx<T>], n: usize, b: &mut [Cx<T>], r: usize) {
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            if lik == czero() {
                continue;
            }
            for c in 0..r {
                let t = b[k * r + c];
                b[i * r + c] = b[i * r + c] - lik * t;
            }
        }
        let d = l[i * n + i];
        for c in 0..r {
            b[i * r + c] = b[i * r + c] / d;
        }
    }
}

/// Solves `Lᴴ X = B` in place.
pub fn backward_substitute_adjoint<T: Real>(l: &[Cx<T>], n: usize, b: &mut [Cx<T>], r: usize) {
    for i in (0..n).rev() {
        let d = l[i * n + i];
        for c in 0..r {
            b[i * r + c] = b[i * r + c] / d;
        }
        for k in 0..i {
            let lik = l[i * n + k].conj();
            for c in 0..r {
                let t = b[i * r + c];
                b[k * r + c] = b[k * r + c] - lik * t;
            }
        }
    }
}

/// Real symmetric positive definite solve `A X = B` (`B` is `n × r`).
pub fn spd_solve_real<T: Real>(a: &[T], n: usize, b: &[T], r: usize) -> Option<Vec<T>> {
    let mut l: Vec<Cx<T>> = a.iter().map(|&x| cx(x, T::zero())).collect();
    if !cholesky_in_place(&mut l, n) {
        return None;
    }
    let mut x: Vec<Cx<T>> = b.iter().map(|&x| cx(x, T::zero())).collect();
    forward_substitute(&l, n, &mut x, r);
    backward_substitute_adjoint(&l, n, &mut x, r);
    Some(x.into_iter().map(|z| z.re).collect())
}

/// Least-squares solution of `V c = y` by Householder QR (`V` is `m × n`,
/// `m ≥ n`). Returns `None` when `V` is numerically rank deficient.
pub fn householder_lstsq<T: Real>(v: &[T], m: usize, n: usize, y: &[T]) -> Option<Vec<T>> {
    assert!(m >= n && v.len() == m * n && y.len() == m);
    let mut a = v.to_vec();
    let mut b = y.to_vec();
    let scale = a.iter().fold(T::zero(), |s, x| s.max(x.abs()));
    for k in 0..n {
        let norm: T = (k..m).map(|i| a[i * n + k] * a[i * n + k]).sum::<T>().sqrt();
        if norm <= scale * T::epsilon() * T::lit(1e3) {
            return None;
        }
        let alpha = if a[k * n + k] > T::zero() { -norm } else { norm };
        let mut w: Vec<T> = (k..m).map(|i| a[i * n + k]).collect();
        w[0] = w[0] - alpha;
        let wn: T = w.iter().map(|x| *x * *x).sum();
        if wn == T::zero() {
            continue;
        }
        for j in k..n {
            let dot: T = (k..m).map(|i| w[i - k] * a[i * n + j]).sum();
            let f = T::lit(2.0) * dot / wn;
            for i in k..m {
                a[i * n + j] = a[i * n + j] - f * w[i - k];
            }
        }
        let dot: T = (k..m).map(|i| w[i - k] * b[i]).sum();
        let f = T::lit(2.0) * dot / wn;
        for i in k..m {
            b[i] = b[i] - f * w[i - k];
        }
    }
    let mut c = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s = s - a[k * n + j] * c[j];
        }
        c[k] = s / a[k * n + k];
    }
    Some(c)
}

/// `C = Aᴴ B` for column-stored blocks (each inner `Vec` a column of length `len`).
pub fn gram<T: Real>(a: &[Vec<Cx<T>>], b: &[Vec<Cx<T>>]) -> Vec<Cx<T>> {
    let mut out = vec![czero::<T>(); a.len() * b.len()];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = dot(ai, bj);
        }
    }
    out
}

/// `aᴴ b`.
#[inline]
pub fn dot<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Cx<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (x, y) in a.iter().zip(b) {
        re = re + x.re * y.re + x.im * y.im;
        im = im + x.re * y.im - x.im * y.re;
    }
    Complex::new(re, im)
}
