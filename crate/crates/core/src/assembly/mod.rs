//! P1 assembly of the Bloch-reduced sesquilinear form.
//!
//! Writing the quasi-periodic field as `e^{i s k1·x} p` with `s = k∥/2π`,
//! the form splits into four k-independent matrices (test index first):
//!
//! ```text
//! A[a][b] = ∫ ∇φ_aᵀ W ∇φ_b        B[a][b] = ∫ φ_a k1ᵀ W ∇φ_b
//! C[a][b] = ∫ φ_a φ_b k1ᵀ W k1    M[a][b] = ∫ φ_a φ_b
//! ```
//!
//! and `S(k∥) = A − i s B + i s Bᴴ + s² C`.

pub mod quadrature;

use std::sync::Arc;

pub use quadrature::{triangle_quadrature, QuadPoint, SUPPORTED_ORDERS};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, CsrPattern};
use crate::material::DomainWallSpec;
use crate::mesh::{p1_gradients, CylinderMesh, DofMap};
use crate::scalar::{cx, Cx, Real};

/// Default triangle quadrature order.
pub const DEFAULT_QUAD_ORDER: usize = 4;

/// The four assembled matrices on the reduced dofs.
#[derive(Debug, Clone)]
pub struct MatrixSet<T> {
    pub a_stiff: CsrMatrix<T>,
    pub b_mixed: CsrMatrix<T>,
    pub c_mass_k1: CsrMatrix<T>,
    pub m_mass: CsrMatrix<T>,
    pub quad_order: usize,
}

impl<T: Real> MatrixSet<T> {
    pub fn n_dof(&self) -> usize {
        self.m_mass.n()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        self.m_mass.pattern()
    }
}

/// `S(k∥)` together with the wave number it was built for.
#[derive(Debug, Clone)]
pub struct BlochStiffness<T> {
    pub s: CsrMatrix<T>,
    pub k_par: T,
}

/// Sparsity pattern of the P1 stencil on the reduced dofs.
pub fn dof_pattern<T: Real>(mesh: &CylinderMesh<T>, map: &DofMap) -> CsrPattern {
    let mut entries = Vec::with_capacity(mesh.triangles.len() * 9);
    for tri in &mesh.triangles {
        for &a in tri {
            for &b in tri {
                if let (Some(da), Some(db)) = (map.node_to_dof[a], map.node_to_dof[b]) {
                    entries.push((da, db));
                }
            }
        }
    }
    CsrPattern::from_entries(map.n_dof, entries)
}

pub fn assemble<T: Real>(
    mesh: &CylinderMesh<T>,
    map: &DofMap,
    spec: &DomainWallSpec<T>,
    quad_order: usize,
) -> Result<MatrixSet<T>> {
    if quad_order < 2 {
        return Err(Error::InvalidArgument(format!(
            "assembly needs a quadrature order of at least 2, got {quad_order}"
        )));
    }
    let rule = triangle_quadrature::<T>(quad_order)?;
    let pattern = Arc::new(dof_pattern(mesh, map));
    let mut a = CsrMatrix::zeros(pattern.clone());
    let mut b = CsrMatrix::zeros(pattern.clone());
    let mut c = CsrMatrix::zeros(pattern.clone());
    let mut m = CsrMatrix::zeros(pattern.clone());
    let k1 = mesh.basis().k1;
    let k1c = [cx(k1.x, T::zero()), cx(k1.y, T::zero())];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let dofs = tri.map(|g| map.node_to_dof[g]);
        if dofs.iter().all(Option::is_none) {
            continue;
        }
        let v = mesh.vertices(t);
        let area = mesh.area(t);
        let grads = p1_gradients(v);
        let gc = grads.map(|g| [cx(g.x, T::zero()), cx(g.y, T::zero())]);
        let mut la = [[Cx::<T>::default(); 3]; 3];
        let mut lb = la;
        let mut lc = la;
        let mut lm = [[T::zero(); 3]; 3];
        for q in &rule {
            let x = v[0] * q.bary[0] + v[1] * q.bary[1] + v[2] * q.bary[2];
            let w = spec.eval_weight(x);
            let wq = q.weight * area;
            let wg = gc.map(|g| w.apply(g));
            let kwk = dot2(&k1c, &w.apply(k1c));
            for ia in 0..3 {
                for ib in 0..3 {
                    let phi = q.bary[ia] * q.bary[ib];
                    la[ia][ib] = la[ia][ib] + dot2(&gc[ia], &wg[ib]) * wq;
                    lb[ia][ib] = lb[ia][ib] + dot2(&k1c, &wg[ib]) * (wq * q.bary[ia]);
                    lc[ia][ib] = lc[ia][ib] + kwk * (wq * phi);
                    lm[ia][ib] = lm[ia][ib] + wq * phi;
                }
            }
        }
        for ia in 0..3 {
            let Some(da) = dofs[ia] else { continue };
            for ib in 0..3 {
                let Some(db) = dofs[ib] else { continue };
                let k = pattern.find(da, db).expect("stencil entry in pattern");
                a.values_mut()[k] = a.values()[k] + la[ia][ib];
                b.values_mut()[k] = b.values()[k] + lb[ia][ib];
                c.values_mut()[k] = c.values()[k] + lc[ia][ib];
                m.values_mut()[k] = m.values()[k] + cx(lm[ia][ib], T::zero());
            }
        }
    }

    let m_mass = m.hermitian_part();
    check_mass(&m_mass)?;
    Ok(MatrixSet {
        a_stiff: a.hermitian_part(),
        b_mixed: b,
        c_mass_k1: c.hermitian_part(),
        m_mass,
        quad_order,
    })
}

/// `uᵀ v` without conjugation.
#[inline]
fn dot2<T: Real>(u: &[Cx<T>; 2], v: &[Cx<T>; 2]) -> Cx<T> {
    u[0] * v[0] + u[1] * v[1]
}

/// Cheap definiteness guard: positive diagonal and weak diagonal dominance.
fn check_mass<T: Real>(m: &CsrMatrix<T>) -> Result<()> {
    let p = m.pattern();
    let tol = T::lit(1e-12);
    for i in 0..m.n() {
        let mut diag = T::zero();
        let mut off = T::zero();
        for k in p.row(i) {
            if p.col(k) == i {
                diag = m.values()[k].re;
            } else {
                off = off + m.values()[k].norm();
            }
        }
        if !(diag > T::zero()) || diag < off * (T::one() - tol) {
            return Err(Error::NotPositiveDefinite {
                row: i,
                pivot: diag.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// `S = A − i s B + i s Bᴴ + s² C` with `s = k∥ / 2π`, exactly Hermitian.
pub fn bloch_stiffness<T: Real>(ms: &MatrixSet<T>, k_par: T) -> BlochStiffness<T> {
    let s = k_par / (T::lit(2.0) * T::PI());
    let p = ms.pattern().clone();
    let mut out = CsrMatrix::zeros(p.clone());
    let minus_is = cx(T::zero(), -s);
    let s2 = s * s;
    let (av, bv, cv) = (ms.a_stiff.values(), ms.b_mixed.values(), ms.c_mass_k1.values());
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        let t = p.transpose_slot(k);
        // Sum of X[k] and conj(X[t]) with X = −i s B; commutativity keeps
        // the (k, t) pair exact conjugates.
        let y = minus_is * bv[k] + (minus_is * bv[t]).conj();
        *o = (av[k] + cv[k] * s2) + y;
    }
    BlochStiffness { s: out, k_par }
}

/// Integral of a nodal vector `u` (periodic indexing) against the constant one,
/// using the P1 interpolant.
pub fn integrate_p1<T: Real>(mesh: &CylinderMesh<T>, map: &DofMap, u: &[T]) -> T {
    let third = T::one() / T::lit(3.0);
    (0..mesh.triangles.len())
        .map(|t| {
            let s: T = mesh.triangles[t].iter().map(|&g| u[map.node_to_periodic[g]]).sum();
            s * third * mesh.area(t)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{BulkSpec, PerturbationSpec};
    use crate::mesh::{build_dof_map, build_mesh};

    fn unit_spec() -> DomainWallSpec<f64> {
        DomainWallSpec::new(BulkSpec::isotropic(1.0, 0.0), PerturbationSpec::PBreaking, 0.0, 1.0).unwrap()
    }

    fn tc1() -> DomainWallSpec<f64> {
        DomainWallSpec::new(BulkSpec::isotropic(23.0, -0.5), PerturbationSpec::PBreaking, 2.0, 1.0).unwrap()
    }

    #[test]
    fn unit_weight_kills_constants_away_from_the_boundary() {
        let mesh = build_mesh::<f64>(4, 1).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &unit_spec(), 2).unwrap();
        for d in 0..map.n_dof {
            let g = map.dof_to_node[d];
            let j = mesh.nodes[g].j;
            if j <= 1 || j + 1 >= mesh.rows() {
                continue;
            }
            let row: Cx<f64> = ms.a_stiff.pattern().row(d).map(|k| ms.a_stiff.values()[k]).sum();
            assert!(row.norm() < 1e-12, "dof {d}: {row}");
        }
    }

    #[test]
    fn mass_total_matches_small_case_oracle() {
        // ∫φ_aφ_b = |T|(1 + δ_ab)/12, so a triangle keeping r vertices
        // contributes |T|(r² + r)/12 to 1ᵀM1.
        let mesh = build_mesh::<f64>(2, 1).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &unit_spec(), 2).unwrap();
        let total: f64 = ms.m_mass.values().iter().map(|v| v.re).sum();
        let mut oracle = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let kept = tri.iter().filter(|&&g| map.node_to_dof[g].is_some()).count();
            oracle += mesh.area(t) * (kept * kept + kept) as f64 / 12.0;
        }
        assert!((total - oracle).abs() < 1e-14);
        assert!(total < 3f64.sqrt());
        // By hand: 16 triangles of area √3/16; the 4 with an edge on the
        // boundary keep one vertex, the 4 with a vertex on it keep two, the
        // other 8 keep all three: (4/6 + 4/2 + 8) · √3/16 = 2√3/3.
        assert!((mesh.area(0) - 3f64.sqrt() / 16.0).abs() < 1e-15);
        assert!((total - 2.0 * 3f64.sqrt() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matrices_are_hermitian_and_sparse() {
        let mesh = build_mesh::<f64>(8, 2).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &tc1(), 4).unwrap();
        assert_eq!(ms.a_stiff.hermitian_defect(), 0.0);
        assert_eq!(ms.c_mass_k1.hermitian_defect(), 0.0);
        assert_eq!(ms.m_mass.hermitian_defect(), 0.0);
        assert!(ms.m_mass.values().iter().all(|v| v.im == 0.0));
        let p = ms.pattern();
        assert!((0..p.n()).all(|i| p.row(i).len() <= 7));
        assert!(p.bandwidth() <= mesh.n() + 1);
    }

    #[test]
    fn bloch_stiffness_is_exactly_hermitian() {
        let mesh = build_mesh::<f64>(8, 2).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &tc1(), 4).unwrap();
        let s0 = bloch_stiffness(&ms, 0.0);
        assert!(s0.s.values().iter().zip(ms.a_stiff.values()).all(|(a, b)| a == b));
        for i in 0..20 {
            let k = 2.0 * std::f64::consts::PI * i as f64 / 19.0;
            assert_eq!(bloch_stiffness(&ms, k).s.hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn bloch_stiffness_is_quadratic_in_k() {
        let mesh = build_mesh::<f64>(4, 1).unwrap();
        let map = build_dof_map(&mesh);
        let ms = assemble(&mesh, &map, &tc1(), 4).unwrap();
        let s = |k: f64| bloch_stiffness(&ms, k).s;
        let (h, k0) = (0.5, 1.3);
        let (sm, s0, sp) = (s(k0 - h), s(k0), s(k0 + h));
        let scale = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        for idx in 0..s0.values().len() {
            let second = (sp.values()[idx] - s0.values()[idx] * 2.0 + sm.values()[idx]) / (h * h);
            let expect = ms.c_mass_k1.values()[idx] * (2.0 * scale);
            assert!((second - expect).norm() < 1e-9 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn tiny_quadrature_orders_are_rejected() {
        let mesh = build_mesh::<f64>(2, 1).unwrap();
        let map = build_dof_map(&mesh);
        assert!(assemble(&mesh, &map, &unit_spec(), 1).is_err());
        assert!(assemble(&mesh, &map, &unit_spec(), 5).is_err());
    }
}
