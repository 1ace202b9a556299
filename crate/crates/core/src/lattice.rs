//! Honeycomb lattice geometry: direct and dual basis, the 2π/3 rotation and
//! conversions between Cartesian and lattice coordinates.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Real;

/// Plain 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Which vector plays the role of the third dual vector `k3`.
///
/// The material weight's lowest Fourier mode uses the exponent
/// `-(k1 + k2)·x`, so [`K3Convention::MinusSum`] is the default. The
/// alternative `k2 - k1` is kept selectable because the perturbation
/// formulas are sometimes written with that choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum K3Convention {
    #[default]
    MinusSum,
    Difference,
}

/// Direct and dual vectors of the honeycomb lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBasis<T> {
    pub v1: Vec2<T>,
    pub v2: Vec2<T>,
    pub k1: Vec2<T>,
    pub k2: Vec2<T>,
    /// Always `-(k1 + k2)`; see [`LatticeBasis::k3_with`] for the alternative.
    pub k3: Vec2<T>,
    /// High-symmetry point `(k1 - k2) / 3`.
    pub k_point: Vec2<T>,
    /// `-K`.
    pub k_prime: Vec2<T>,
}

/// Returns the canonical honeycomb basis with unit-length direct vectors.
pub fn make_honeycomb_basis<T: Real>() -> LatticeBasis<T> {
    let half = T::lit(0.5);
    let s3 = T::lit(3.0).sqrt();
    let v1 = Vec2::new(s3 * half, half);
    let v2 = Vec2::new(s3 * half, -half);
    let scale = T::lit(4.0) * T::PI() / s3;
    let k1 = Vec2::new(half, s3 * half) * scale;
    let k2 = Vec2::new(half, -s3 * half) * scale;
    let k3 = -(k1 + k2);
    let k_point = (k1 - k2) * (T::one() / T::lit(3.0));
    LatticeBasis {
        v1,
        v2,
        k1,
        k2,
        k3,
        k_point,
        k_prime: -k_point,
    }
}

impl<T: Real> LatticeBasis<T> {
    pub fn k3_with(&self, convention: K3Convention) -> Vec2<T> {
        match convention {
            K3Convention::MinusSum => self.k3,
            K3Convention::Difference => self.k2 - self.k1,
        }
    }

    /// Lattice coordinates `(τ1, τ2)` with `x = τ1 v1 + τ2 v2`.
    pub fn to_lattice_coords(&self, x: Vec2<T>) -> (T, T) {
        let two_pi = T::lit(2.0) * T::PI();
        (self.k1.dot(x) / two_pi, self.k2.dot(x) / two_pi)
    }

    pub fn from_lattice_coords(&self, tau1: T, tau2: T) -> Vec2<T> {
        self.v1 * tau1 + self.v2 * tau2
    }

    /// Area of the unit cell spanned by `v1`, `v2`.
    pub fn cell_area(&self) -> T {
        self.v1.cross(self.v2).abs()
    }
}

/// Free-function form of [`LatticeBasis::to_lattice_coords`].
pub fn to_lattice_coords<T: Real>(basis: &LatticeBasis<T>, x: Vec2<T>) -> (T, T) {
    basis.to_lattice_coords(x)
}

/// 2×2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix<T> {
    pub m: [[T; 2]; 2],
}

/// Clockwise rotation by 2π/3.
pub fn rotation_matrix<T: Real>() -> RotationMatrix<T> {
    let half = T::lit(0.5);
    let s = T::lit(3.0).sqrt() * half;
    RotationMatrix {
        m: [[-half, s], [-s, -half]],
    }
}

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        Self {
            m: [[T::one(), T::zero()], [T::zero(), T::one()]],
        }
    }

    pub fn apply(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    /// `R* = Rᵀ`.
    pub fn transpose(&self) -> Self {
        Self {
            m: [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]],
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut m = [[T::zero(); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Self { m }
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: Vec2<f64>, b: Vec2<f64>, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn biorthogonality() {
        let b = make_honeycomb_basis::<f64>();
        let ks = [b.k1, b.k2];
        let vs = [b.v1, b.v2];
        for (i, k) in ks.iter().enumerate() {
            for (j, v) in vs.iter().enumerate() {
                let expect = if i == j { 2.0 * PI } else { 0.0 };
                assert!((k.dot(*v) - expect).abs() < 1e-14);
            }
        }
        assert!((b.v1.norm() - 1.0).abs() < 1e-15);
        assert!((b.v2.norm() - 1.0).abs() < 1e-15);
        assert!(close(b.k3, -(b.k1 + b.k2), 1e-15));
        assert!(close(b.k_prime, -b.k_point, 1e-15));
    }

    #[test]
    fn dirac_momentum_projection() {
        let b = make_honeycomb_basis::<f64>();
        assert!((b.k_point.dot(b.v1) - 2.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn lattice_coordinates_examples() {
        let b = make_honeycomb_basis::<f64>();
        let (t1, t2) = b.to_lattice_coords(b.v1);
        assert!((t1 - 1.0).abs() < 1e-14 && t2.abs() < 1e-14);
        let (t1, t2) = b.to_lattice_coords(b.v1 + b.v2 * 3.0);
        assert!((t1 - 1.0).abs() < 1e-14 && (t2 - 3.0).abs() < 1e-14);
        let (t1, t2) = to_lattice_coords(&b, Vec2::new(3f64.sqrt(), 0.0));
        assert!((t1 - 1.0).abs() < 1e-14 && (t2 - 1.0).abs() < 1e-14);
        assert!((b.cell_area() - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        let r = rotation_matrix::<f64>();
        let r3 = r.mul(&r).mul(&r);
        let id = RotationMatrix::<f64>::identity();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r3.m[i][j] - id.m[i][j]).abs() < 1e-15);
                assert!((r.transpose().mul(&r).m[i][j] - id.m[i][j]).abs() < 1e-15);
            }
        }
        assert!((r.det() - 1.0).abs() < 1e-15);
        let e = r.apply(Vec2::new(1.0, 0.0));
        assert!(close(e, Vec2::new(-0.5, -(3f64.sqrt()) / 2.0), 1e-15));
        let b = make_honeycomb_basis::<f64>();
        assert!(close(r.transpose().apply(b.v1), -b.v2, 1e-15));
        assert!(close(r.apply(b.v1), Vec2::new(0.0, -1.0), 1e-15));
    }

    #[test]
    fn dual_set_is_rotation_invariant() {
        let b = make_honeycomb_basis::<f64>();
        let rs = rotation_matrix::<f64>().transpose();
        let set = [b.k1, b.k2, b.k3, -b.k1, -b.k2, -b.k3];
        for k in [b.k1, b.k2, b.k3] {
            let rk = rs.apply(k);
            assert!(set.iter().any(|s| close(*s, rk, 1e-13)), "R*k not in dual set");
        }
    }

    #[test]
    fn single_precision_basis() {
        let b = make_honeycomb_basis::<f32>();
        assert!((b.k1.dot(b.v1) - 2.0 * std::f32::consts::PI).abs() < 1e-5);
        assert!(b.k2.dot(b.v1).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn lattice_round_trip(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let b = make_honeycomb_basis::<f64>();
            let p = Vec2::new(x, y);
            let (t1, t2) = b.to_lattice_coords(p);
            prop_assert!(close(b.from_lattice_coords(t1, t2), p, 1e-13));
        }
    }
}
