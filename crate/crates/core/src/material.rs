//! Material weight `W(x) = A(x) + δ η(δ k2·x) B(x)` of a domain-wall
//! modulated honeycomb medium, and sampling-based checks of its symmetries.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{make_honeycomb_basis, rotation_matrix, K3Convention, LatticeBasis, RotationMatrix, Vec2};
use crate::scalar::{cis, cx, czero, Cx, Real};

/// 2×2 complex matrix. Used for Hermitian weight values, but arithmetic is
/// general so intermediate non-Hermitian terms can be represented too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermMat2<T> {
    pub m: [[Cx<T>; 2]; 2],
}

impl<T: Real> HermMat2<T> {
    pub fn zero() -> Self {
        Self { m: [[czero(); 2]; 2] }
    }

    pub fn identity() -> Self {
        Self::scalar(T::one())
    }

    pub fn scalar(s: T) -> Self {
        let mut out = Self::zero();
        out.m[0][0] = cx(s, T::zero());
        out.m[1][1] = cx(s, T::zero());
        out
    }

    pub fn from_real(r: [[T; 2]; 2]) -> Self {
        let mut out = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = cx(r[i][j], T::zero());
            }
        }
        out
    }

    /// Second Pauli matrix `((0, -i), (i, 0))`.
    pub fn sigma2() -> Self {
        let mut out = Self::zero();
        out.m[0][1] = cx(T::zero(), -T::one());
        out.m[1][0] = cx(T::zero(), T::one());
        out
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * s;
            }
        }
        out
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(cx(s, T::zero()))
    }

    pub fn conj(&self) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v = v.conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let m = self.m;
        Self {
            m: [[m[0][0], m[1][0]], [m[0][1], m[1][1]]],
        }
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn frobenius(&self) -> T {
        self.m
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// `‖W − Wᴴ‖_F`.
    pub fn hermitian_defect(&self) -> T {
        (*self - self.adjoint()).frobenius()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> (T, T) {
        let h = (*self + self.adjoint()).scale_real(T::lit(0.5));
        let a = h.m[0][0].re;
        let d = h.m[1][1].re;
        let b = h.m[0][1];
        let half = T::lit(0.5);
        let mean = (a + d) * half;
        let rad = ((a - d) * (a - d) * T::lit(0.25) + b.norm_sqr()).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().0
    }

    /// Smallest eigenvalue of the real symmetric part `Re W`, which is the
    /// principal symbol of `-∇·W∇`. Positive means uniformly elliptic.
    pub fn min_symbol_eigenvalue(&self) -> T {
        let mut re = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                let s = (self.m[i][j].re + self.m[j][i].re) * T::lit(0.5);
                re.m[i][j] = cx(s, T::zero());
            }
        }
        re.min_eigenvalue()
    }

    /// `W v` for a complex 2-vector.
    pub fn apply(&self, v: [Cx<T>; 2]) -> [Cx<T>; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// `uᴴ W v`.
    pub fn form(&self, u: [Cx<T>; 2], v: [Cx<T>; 2]) -> Cx<T> {
        let wv = self.apply(v);
        u[0].conj() * wv[0] + u[1].conj() * wv[1]
    }

    pub fn is_real(&self, tol: T) -> bool {
        self.m.iter().flatten().all(|v| v.im.abs() <= tol)
    }

    pub fn is_imaginary(&self, tol: T) -> bool {
        self.m.iter().flatten().all(|v| v.re.abs() <= tol)
    }
}

impl<T: Real> Add for HermMat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        out
    }
}

impl<T: Real> Sub for HermMat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][j] - o.m[i][j];
            }
        }
        out
    }
}

impl<T: Real> Mul for HermMat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        out
    }
}

fn rotate_real<T: Real>(r: &RotationMatrix<T>, c: [[T; 2]; 2], rt: &RotationMatrix<T>) -> [[T; 2]; 2] {
    let cm = RotationMatrix { m: c };
    r.mul(&cm).mul(rt).m
}

/// Periodic honeycomb part `A(x)` built from its lowest Fourier modes.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkSpec<T> {
    pub a0: T,
    /// Lowest Fourier coefficient, row-major.
    pub c: [[T; 2]; 2],
}

impl<T: Real> BulkSpec<T> {
    /// `a0 = 23, C = −½ I`: the isotropic medium of the P-breaking test cases.
    pub fn isotropic(a0: T, c: T) -> Self {
        Self {
            a0,
            c: [[c, T::zero()], [T::zero(), c]],
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.c[0][1] == self.c[1][0]
    }

    pub fn is_isotropic(&self) -> bool {
        self.c[0][1] == T::zero() && self.c[1][0] == T::zero() && self.c[0][0] == self.c[1][1]
    }
}

/// One Hermitian Fourier pair `Q e^{i g·x} + Qᴴ e^{-i g·x}` with
/// `g = n1 k1 + n2 k2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTerm<T> {
    pub n1: i32,
    pub n2: i32,
    pub coeff: [[Cx<T>; 2]; 2],
}

/// The perturbation `B(x)` that breaks PC symmetry.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationSpec<T> {
    /// `[sin(k1·x) + sin(k2·x) + sin(k3·x)] I`: real and odd.
    PBreaking,
    /// `[cos(k1·x) + cos(k2·x) + cos(k3·x)] σ2`: imaginary and even.
    CBreaking,
    /// Sum of Hermitian Fourier pairs.
    Fourier(Vec<FourierTerm<T>>),
}

/// Shape of the domain wall `η(ζ) = η∞ · profile(ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WallProfile {
    #[default]
    Tanh,
    /// `ζ / sqrt(1 + ζ²)`.
    Algebraic,
}

impl WallProfile {
    pub fn unit<T: Real>(self, zeta: T) -> T {
        match self {
            WallProfile::Tanh => zeta.tanh(),
            WallProfile::Algebraic => zeta / (T::one() + zeta * zeta).sqrt(),
        }
    }
}

/// Full description of the domain-wall modulated weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainWallSpec<T> {
    pub bulk: BulkSpec<T>,
    pub perturbation: PerturbationSpec<T>,
    pub delta: T,
    pub eta_infinity: T,
    pub wall_profile: WallProfile,
    pub k3_convention: K3Convention,
    basis: LatticeBasis<T>,
    /// `C, R C R*, R* C R` paired with the wave vectors `k1, k2, -(k1+k2)`.
    bulk_modes: [([[T; 2]; 2], Vec2<T>); 3],
}

impl<T: Real> DomainWallSpec<T> {
    /// Builds a spec and checks the scalar parameters. Positive definiteness
    /// is checked separately by [`DomainWallSpec::check_ellipticity`].
    pub fn new(bulk: BulkSpec<T>, perturbation: PerturbationSpec<T>, delta: T, eta_infinity: T) -> Result<Self> {
        if !(bulk.a0 > T::zero()) {
            return Err(Error::InvalidMaterial(format!("a0 must be positive, got {}", bulk.a0)));
        }
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidMaterial(format!(
                "delta must be finite and non-negative, got {delta}"
            )));
        }
        if !(eta_infinity > T::zero()) || !eta_infinity.is_finite() {
            return Err(Error::InvalidMaterial(format!(
                "eta_infinity must be positive, got {eta_infinity}"
            )));
        }
        if bulk.c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMaterial("C has non-finite entries".into()));
        }
        let basis = make_honeycomb_basis();
        let r = rotation_matrix();
        let rt = r.transpose();
        let bulk_modes = [
            (bulk.c, basis.k1),
            (rotate_real(&r, bulk.c, &rt), basis.k2),
            (rotate_real(&rt, bulk.c, &r), basis.k3),
        ];
        Ok(Self {
            bulk,
            perturbation,
            delta,
            eta_infinity,
            wall_profile: WallProfile::Tanh,
            k3_convention: K3Convention::MinusSum,
            basis,
            bulk_modes,
        })
    }

    /// Same as [`DomainWallSpec::new`] but bypasses the `a0 > 0` check, so
    /// deliberately broken media can be fed to the validator.
    pub fn new_unchecked(bulk: BulkSpec<T>, perturbation: PerturbationSpec<T>, delta: T, eta_infinity: T) -> Self {
        let a0 = bulk.a0;
        let mut probe = bulk.clone();
        probe.a0 = T::one();
        let mut spec = Self::new(probe, perturbation, delta, eta_infinity).expect("scalar parameters");
        spec.bulk.a0 = a0;
        spec
    }

    pub fn with_profile(mut self, profile: WallProfile) -> Self {
        self.wall_profile = profile;
        self
    }

    pub fn with_k3_convention(mut self, convention: K3Convention) -> Self {
        self.k3_convention = convention;
        self
    }

    pub fn basis(&self) -> &LatticeBasis<T> {
        &self.basis
    }

    /// `A(x)`.
    pub fn eval_bulk(&self, x: Vec2<T>) -> HermMat2<T> {
        let mut out = HermMat2::scalar(self.bulk.a0);
        for (c, k) in &self.bulk_modes {
            let e = cis(k.dot(x));
            let cm = HermMat2::from_real(*c);
            out = out + cm.scale(e) + cm.transpose().scale(e.conj());
        }
        out
    }

    /// `B(x)`.
    pub fn eval_perturbation(&self, x: Vec2<T>) -> HermMat2<T> {
        let b = &self.basis;
        let k3 = b.k3_with(self.k3_convention);
        let phases = [b.k1.dot(x), b.k2.dot(x), k3.dot(x)];
        match &self.perturbation {
            PerturbationSpec::PBreaking => HermMat2::scalar(phases.iter().map(|p| p.sin()).sum::<T>()),
            PerturbationSpec::CBreaking => HermMat2::sigma2().scale_real(phases.iter().map(|p| p.cos()).sum::<T>()),
            PerturbationSpec::Fourier(terms) => {
                let mut out = HermMat2::zero();
                for t in terms {
                    let g = b.k1 * T::lit(t.n1 as f64) + b.k2 * T::lit(t.n2 as f64);
                    let q = HermMat2 { m: t.coeff };
                    let e = cis(g.dot(x));
                    out = out + q.scale(e) + q.adjoint().scale(e.conj());
                }
                out
            }
        }
    }

    /// `η(ζ)`.
    pub fn eta(&self, zeta: T) -> T {
        self.eta_infinity * self.wall_profile.unit(zeta)
    }

    /// `W(x) = A(x) + δ η(δ k2·x) B(x)`.
    pub fn eval_weight(&self, x: Vec2<T>) -> HermMat2<T> {
        let a = self.eval_bulk(x);
        if self.delta == T::zero() {
            return a;
        }
        let eta = self.eta(self.delta * self.basis.k2.dot(x));
        a + self.eval_perturbation(x).scale_real(self.delta * eta)
    }

    /// Smallest eigenvalue of `Re W` over a `grid × grid` sampling of the
    /// unit cell at both saturated wall values `η = ±η∞`.
    ///
    /// `Re W` is affine in `η`, so positivity at the two extremes covers
    /// every point of the wall.
    pub fn ellipticity_margin(&self, grid: usize) -> T {
        self.extreme_samples(grid)
            .map(|w| w.min_symbol_eigenvalue())
            .fold(T::infinity(), T::min)
    }

    /// Same sampling as [`Self::ellipticity_margin`], reporting the smallest
    /// eigenvalue of the Hermitian matrix `W` itself.
    pub fn hermitian_margin(&self, grid: usize) -> T {
        self.extreme_samples(grid)
            .map(|w| w.min_eigenvalue())
            .fold(T::infinity(), T::min)
    }

    fn extreme_samples(&self, grid: usize) -> impl Iterator<Item = HermMat2<T>> + '_ {
        let g = grid.max(1);
        let amp = self.delta * self.eta_infinity;
        (0..g * g).flat_map(move |idx| {
            let t1 = T::from_usize_lossy(idx % g) / T::from_usize_lossy(g);
            let t2 = T::from_usize_lossy(idx / g) / T::from_usize_lossy(g);
            let x = self.basis.from_lattice_coords(t1, t2);
            let a = self.eval_bulk(x);
            let b = self.eval_perturbation(x).scale_real(amp);
            [a + b, a - b]
        })
    }

    /// Errors when `Re W` fails to be positive definite on a 64×64 grid.
    pub fn check_ellipticity(&self) -> Result<()> {
        let margin = self.ellipticity_margin(64);
        if margin > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidMaterial(format!(
                "material weight is not uniformly elliptic (min eigenvalue of Re W = {margin})"
            )))
        }
    }
}

/// Pass/fail line of a [`SymmetryReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryCheck {
    pub name: &'static str,
    /// Maximum violation over the samples; for the definiteness checks this
    /// is the minimum eigenvalue instead.
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub checks: Vec<SymmetryCheck>,
    pub notes: Vec<String>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SymmetryCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for SymmetryReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<24} {:>14.6e}  {}",
                c.name,
                c.value,
                if c.passed { "pass" } else { "FAIL" }
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

pub const SYMMETRY_TOL: f64 = 1e-12;

/// Spot-checks the honeycomb conditions on `n_samples` random points plus
/// the lattice-symmetric points `0`, `v1/2`, `(v1+v2)/3`.
pub fn validate_symmetries<T: Real>(spec: &DomainWallSpec<T>, n_samples: usize, seed: u64) -> Result<SymmetryReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let b = *spec.basis();
    let rt = rotation_matrix::<T>().transpose();
    let rmat = HermMat2::from_real(rotation_matrix::<T>().m);
    let rtmat = rmat.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let third = T::one() / T::lit(3.0);
    let mut points = vec![Vec2::zero(), b.v1 * T::lit(0.5), (b.v1 + b.v2) * third];
    for _ in 0..n_samples {
        let t1 = T::lit(rng.gen_range(-3.0..3.0));
        let t2 = T::lit(rng.gen_range(-3.0..3.0));
        points.push(b.from_lattice_coords(t1, t2));
    }
    // Violations are measured relative to the size of A.
    let scale = (spec.bulk.a0.abs() + spec.bulk.c.iter().flatten().map(|v| v.abs()).sum::<T>()).max(T::one());

    let mut herm = T::zero();
    let mut periodic = T::zero();
    let mut pc = T::zero();
    let mut rot = T::zero();
    let mut anti_pc = T::zero();
    for &x in &points {
        let a = spec.eval_bulk(x);
        let w = spec.eval_weight(x);
        herm = herm.max(w.hermitian_defect().max(a.hermitian_defect()));
        for (m, n) in [(1.0, 0.0), (0.0, 1.0), (-2.0, 1.0), (2.0, -2.0)] {
            let shifted = x + b.v1 * T::lit(m) + b.v2 * T::lit(n);
            periodic = periodic.max((spec.eval_bulk(shifted) - a).frobenius());
        }
        pc = pc.max((spec.eval_bulk(-x).conj() - a).frobenius());
        let lhs = spec.eval_bulk(rt.apply(x));
        let rhs = rtmat * a * rmat;
        rot = rot.max((lhs - rhs).frobenius());
        let bx = spec.eval_perturbation(x);
        anti_pc = anti_pc.max((spec.eval_perturbation(-x).conj() + bx).frobenius());
    }
    let tol = T::lit(SYMMETRY_TOL) * scale;
    let grid_margin = spec.ellipticity_margin(64);
    let herm_margin = spec.hermitian_margin(64);

    let entry = |name, v: T, ok: bool| SymmetryCheck {
        name,
        value: v.to_f64_lossy(),
        passed: ok,
    };
    let checks = vec![
        entry("hermitian", herm, herm <= tol),
        entry("periodicity", periodic, periodic <= tol),
        entry("pc_invariance", pc, pc <= tol),
        entry("r_invariance", rot, rot <= tol),
        entry("b_anti_pc", anti_pc, anti_pc <= tol),
        entry("positive_definite", grid_margin, grid_margin > T::zero()),
    ];
    let mut notes = Vec::new();
    if !spec.bulk.is_symmetric() {
        notes.push("A complex/anisotropic: C is not symmetric, so A(x) is complex Hermitian".to_string());
    } else if !spec.bulk.is_isotropic() {
        notes.push("A anisotropic: C is symmetric but not a multiple of I".to_string());
    }
    if herm_margin <= T::zero() && grid_margin > T::zero() {
        notes.push(format!(
            "W is indefinite as a Hermitian matrix (min eigenvalue {herm_margin:.4}); its real part is positive definite so the operator stays elliptic"
        ));
    }
    Ok(SymmetryReport { checks, notes })
}

/// Convenience constructor for the complex 2×2 coefficient of a Fourier term.
pub fn complex_matrix<T: Real>(re: [[T; 2]; 2], im: [[T; 2]; 2]) -> [[Cx<T>; 2]; 2] {
    let mut m = [[czero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = Complex::new(re[i][j], im[i][j]);
        }
    }
    m
}
