//! Polynomial preserving recovery (PPR) of nodal gradients.
//!
//! Each node gets a least-squares quadratic over its patch; the recovered
//! gradient is the gradient of that quadratic at the node. The fit is linear
//! in the data, so the whole procedure collapses to two sparse matrices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::mesh::{CylinderMesh, DofMap, NodePatch};
use crate::scalar::{czero, Cx, Real};

/// Real sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCsr<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> RealCsr<T> {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn mul_real(&self, u: &[T]) -> Vec<T> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, w)| w * u[j]).sum())
            .collect()
    }

    pub fn mul_complex(&self, u: &[Cx<T>]) -> Vec<Cx<T>> {
        (0..self.n_rows)
            .map(|i| self.row(i).fold(czero(), |acc, (j, w)| acc + u[j] * w))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, w)| w.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }
}

/// The recovery matrices `Gx`, `Gy`, acting on the periodic index space.
///
/// Dirichlet nodes keep their rows: the recovered gradient is nonzero there
/// even though the field vanishes. Dof vectors are zero-extended first.
#[derive(Debug, Clone)]
pub struct RecoveryOperator<T> {
    pub gx: RealCsr<T>,
    pub gy: RealCsr<T>,
    pub patches: Vec<NodePatch<T>>,
    /// Fit weights aligned with `patches[p].members`, before merging
    /// repeated periodic nodes.
    pub member_weights: Vec<Vec<(T, T)>>,
    h: T,
    periodic_to_dof: Vec<Option<usize>>,
    n_dof: usize,
}

/// Gradient at the patch center of the least-squares quadratic through
/// `values` (one per patch member), solved by Householder QR.
pub fn fit_local_quadratic<T: Real>(patch: &NodePatch<T>, values: &[T], h: T) -> Result<(T, T)> {
    if values.len() != patch.members.len() {
        return Err(Error::DimensionMismatch {
            expected: patch.members.len(),
            got: values.len(),
        });
    }
    let v: Vec<T> = patch.vandermonde().into_iter().flatten().collect();
    let c = dense::householder_lstsq(&v, values.len(), 6, values)
        .ok_or(Error::RankDeficientPatch { node: patch.center })?;
    Ok((c[1] / h, c[2] / h))
}

/// Rows of the pseudo-inverse giving `∂x`, `∂y` at the center, via the
/// normal equations on the scaled Vandermonde matrix.
fn patch_weights<T: Real>(patch: &NodePatch<T>, h: T) -> Result<Vec<(T, T)>> {
    let rows = patch.vandermonde();
    let m = rows.len();
    let mut gram = [T::zero(); 36];
    let mut vt = vec![T::zero(); 6 * m];
    for (r, row) in rows.iter().enumerate() {
        for a in 0..6 {
            vt[a * m + r] = row[a];
            for b in 0..6 {
                gram[a * 6 + b] = gram[a * 6 + b] + row[a] * row[b];
            }
        }
    }
    let x = dense::spd_solve_real(&gram, 6, &vt, m).ok_or(Error::RankDeficientPatch { node: patch.center })?;
    Ok((0..m).map(|r| (x[m + r] / h, x[2 * m + r] / h)).collect())
}

pub fn build_recovery<T: Real>(
    mesh: &CylinderMesh<T>,
    map: &DofMap,
    patches: Vec<NodePatch<T>>,
) -> Result<RecoveryOperator<T>> {
    if patches.len() != map.n_periodic {
        return Err(Error::DimensionMismatch {
            expected: map.n_periodic,
            got: patches.len(),
        });
    }
    let h = mesh.h();
    let member_weights: Vec<Vec<(T, T)>> = patches.par_iter().map(|p| patch_weights(p, h)).collect::<Result<_>>()?;
    let n = map.n_periodic;
    let mut gx = RealCsr {
        n_rows: n,
        n_cols: n,
        row_ptr: vec![0],
        col_idx: Vec::new(),
        values: Vec::new(),
    };
    let mut gy = gx.clone();
    for (patch, weights) in patches.iter().zip(&member_weights) {
        let mut row: Vec<(usize, T, T)> = patch
            .members
            .iter()
            .zip(weights)
            .map(|(m, &(wx, wy))| (m.node, wx, wy))
            .collect();
        row.sort_by_key(|r| r.0);
        let mut merged: Vec<(usize, T, T)> = Vec::with_capacity(row.len());
        for (c, wx, wy) in row {
            match merged.last_mut() {
                Some(last) if last.0 == c => {
                    last.1 = last.1 + wx;
                    last.2 = last.2 + wy;
                }
                _ => merged.push((c, wx, wy)),
            }
        }
        for (c, wx, wy) in merged {
            gx.col_idx.push(c);
            gx.values.push(wx);
            gy.col_idx.push(c);
            gy.values.push(wy);
        }
        gx.row_ptr.push(gx.col_idx.len());
        gy.row_ptr.push(gy.col_idx.len());
    }
    Ok(RecoveryOperator {
        gx,
        gy,
        patches,
        member_weights,
        h,
        periodic_to_dof: map.periodic_to_dof.clone(),
        n_dof: map.n_dof,
    })
}

impl<T: Real> RecoveryOperator<T> {
    pub fn h(&self) -> T {
        self.h
    }

    pub fn n_periodic(&self) -> usize {
        self.periodic_to_dof.len()
    }

    /// Accepts a dof vector (zero-extended here) or a periodic-space vector.
    fn to_periodic(&self, u: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        if u.len() == self.n_periodic() {
            Ok(u.to_vec())
        } else if u.len() == self.n_dof {
            Ok(self
                .periodic_to_dof
                .iter()
                .map(|d| d.map_or_else(czero, |d| u[d]))
                .collect())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n_dof,
                got: u.len(),
            })
        }
    }
}

/// Recovered `x` and `y` derivatives of a nodal field.
pub type Gradient<T> = (Vec<Cx<T>>, Vec<Cx<T>>);

/// `(Gx u, Gy u)` on the periodic index space.
pub fn recover_gradient<T: Real>(op: &RecoveryOperator<T>, u: &[Cx<T>]) -> Result<Gradient<T>> {
    let full = op.to_periodic(u)?;
    Ok((op.gx.mul_complex(&full), op.gy.mul_complex(&full)))
}
