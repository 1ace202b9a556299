//! Mesh-refinement study: Cauchy differences of raw and recovered
//! eigenvalues and of recovered gradients over nested meshes, with fitted
//! log-log slopes.

use std::io::Write;

use rayon::prelude::*;

use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::material::DomainWallSpec;
use crate::mesh::{CylinderMesh, Diagonal, DofMap};
use crate::scalar::{cis, Cx, Real};
use crate::spectrum::{Discretization, ModeField};

#[derive(Debug, Clone)]
pub struct StudyConfig<T> {
    pub n_list: Vec<usize>,
    pub l: usize,
    pub k_par: T,
    pub bands: usize,
    pub diagonal: Diagonal,
    pub quad_order: usize,
    pub solver: SolverOptions<T>,
}

impl<T: Real> StudyConfig<T> {
    /// `L = 4`, `N ∈ {16, 32, 64, 128}`, `k∥ = 0.56π`, six bands.
    pub fn desk() -> Self {
        Self {
            n_list: vec![16, 32, 64, 128],
            l: 4,
            k_par: T::lit(0.56) * T::PI(),
            bands: 6,
            diagonal: Diagonal::Regular,
            quad_order: crate::assembly::DEFAULT_QUAD_ORDER,
            solver: SolverOptions::default(),
        }
    }
}

/// Eigen-data of one mesh in the sequence.
#[derive(Debug, Clone)]
pub struct MeshLevel<T> {
    pub n: usize,
    pub e_fem: Vec<T>,
    pub e_recovered: Vec<T>,
}

/// Differences between meshes `N_coarse` and `N_fine = 2 N_coarse`.
#[derive(Debug, Clone)]
pub struct PairErrors<T> {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// `|E_c − E_f| / E_f` per band.
    pub err_fem: Vec<T>,
    pub err_recovered: Vec<T>,
    /// `‖G p_c − G p_f‖₀` on the fine mesh.
    pub de_gradient: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSlopes<T> {
    pub err_fem: T,
    pub err_recovered: T,
    pub de_gradient: T,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport<T> {
    pub k_par: T,
    pub levels: Vec<MeshLevel<T>>,
    pub pairs: Vec<PairErrors<T>>,
    /// One entry per band; empty with fewer than three meshes.
    pub slopes: Vec<BandSlopes<T>>,
}

/// Checks that every `N` doubles the previous one.
pub fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a refinement study needs at least two meshes, got {}",
            n_list.len()
        )));
    }
    if n_list[0] < 2 {
        return Err(Error::InvalidArgument(format!(
            "N must be at least 2, got {}",
            n_list[0]
        )));
    }
    for w in n_list.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidArgument(format!(
                "N list must double at every step, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

struct Level<T> {
    disc: Discretization<T>,
    fields: Vec<ModeField<T>>,
}

fn solve_level<T: Real>(spec: &DomainWallSpec<T>, n: usize, cfg: &StudyConfig<T>) -> Result<Level<T>> {
    let disc = Discretization::new(spec.clone(), n, cfg.l, cfg.diagonal, cfg.quad_order)?;
    let r = disc.solve(cfg.k_par, cfg.bands, &cfg.solver)?;
    let fields = r
        .eigenvalues
        .iter()
        .zip(&r.eigenvectors)
        .enumerate()
        .map(|(b, (&e, v))| disc.mode_field(cfg.k_par, b, e, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Level { disc, fields })
}

/// Runs the study. Meshes are solved concurrently.
pub fn run_study<T: Real>(spec: &DomainWallSpec<T>, cfg: &StudyConfig<T>) -> Result<ConvergenceReport<T>> {
    check_n_list(&cfg.n_list)?;
    if cfg.bands == 0 {
        return Err(Error::InvalidArgument("at least one band is required".into()));
    }
    let levels: Vec<Level<T>> = cfg
        .n_list
        .par_iter()
        .map(|&n| solve_level(spec, n, cfg))
        .collect::<Result<_>>()?;

    let pairs: Vec<PairErrors<T>> = levels
        .windows(2)
        .map(|w| {
            let (c, f) = (&w[0], &w[1]);
            let rel = |a: T, b: T| (a - b).abs() / b.abs();
            PairErrors {
                n_coarse: c.disc.mesh.n(),
                n_fine: f.disc.mesh.n(),
                err_fem: c
                    .fields
                    .iter()
                    .zip(&f.fields)
                    .map(|(a, b)| rel(a.eigenvalue, b.eigenvalue))
                    .collect(),
                err_recovered: c
                    .fields
                    .iter()
                    .zip(&f.fields)
                    .map(|(a, b)| rel(a.recovered_eigenvalue, b.recovered_eigenvalue))
                    .collect(),
                de_gradient: c
                    .fields
                    .iter()
                    .zip(&f.fields)
                    .map(|(a, b)| gradient_difference(&c.disc, a, &f.disc, b))
                    .collect(),
            }
        })
        .collect();

    let slopes = if pairs.len() >= 2 {
        let log_h: Vec<T> = pairs
            .iter()
            .map(|p| (T::one() / T::from_usize_lossy(p.n_coarse)).ln())
            .collect();
        (0..cfg.bands)
            .map(|b| {
                let fit = |get: &dyn Fn(&PairErrors<T>) -> T| {
                    let y: Vec<T> = pairs.iter().map(|p| get(p).ln()).collect();
                    fit_slope(&log_h, &y)
                };
                BandSlopes {
                    err_fem: fit(&|p| p.err_fem[b]),
                    err_recovered: fit(&|p| p.err_recovered[b]),
                    de_gradient: fit(&|p| p.de_gradient[b]),
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(ConvergenceReport {
        k_par: cfg.k_par,
        levels: levels
            .iter()
            .map(|l| MeshLevel {
                n: l.disc.mesh.n(),
                e_fem: l.fields.iter().map(|f| f.eigenvalue).collect(),
                e_recovered: l.fields.iter().map(|f| f.recovered_eigenvalue).collect(),
            })
            .collect(),
        pairs,
        slopes,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(a, b)| (*a - mx) * (*b - my)).sum();
    let sxx: T = x.iter().map(|a| (*a - mx) * (*a - mx)).sum();
    sxy / sxx
}

/// Unit phase that makes `u` real and positive at the periodic node `p`.
fn phase_at<T: Real>(u: &[Cx<T>], p: usize) -> Cx<T> {
    let z = u[p];
    if z.norm() > T::zero() {
        cis(-z.arg())
    } else {
        cis(T::zero())
    }
}

/// Coarse node shared with the finer mesh where the coarse field is largest.
fn anchor_nodes<T: Real>(
    coarse: &CylinderMesh<T>,
    cmap: &DofMap,
    fine: &CylinderMesh<T>,
    fmap: &DofMap,
    u: &[Cx<T>],
) -> (usize, usize) {
    let ratio = fine.n() / coarse.n();
    let pc = (0..cmap.n_periodic)
        .max_by(|&a, &b| {
            u[a].norm()
                .partial_cmp(&u[b].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let node = &coarse.nodes[cmap.periodic_to_node[pc]];
    let g = fine.node_index(node.i * ratio, node.j * ratio);
    (pc, fmap.node_to_periodic[g])
}

/// `‖G_h p_c − G_h p_f‖₀` over the fine mesh, with the coarse recovered
/// gradient carried over by its piecewise-linear interpolant. Both fields
/// are first rotated so they are real and positive at the common node where
/// the coarse field peaks.
pub fn gradient_difference<T: Real>(
    cd: &Discretization<T>,
    coarse: &ModeField<T>,
    fd: &Discretization<T>,
    fine: &ModeField<T>,
) -> T {
    let (pc, pf) = anchor_nodes(&cd.mesh, &cd.map, &fd.mesh, &fd.map, &coarse.nodal);
    let rc = phase_at(&coarse.nodal, pc);
    let rf = phase_at(&fine.nodal, pf);
    let fmesh = &fd.mesh;
    let n_per = fd.map.n_periodic;
    let mut dx = vec![Cx::new(T::zero(), T::zero()); n_per];
    let mut dy = dx.clone();
    for p in 0..n_per {
        let nd = &fmesh.nodes[fd.map.periodic_to_node[p]];
        let (t, lam) = cd.mesh.locate(nd.tau1, nd.tau2);
        let tri = cd.mesh.triangles[t];
        let (mut gx, mut gy) = (Cx::new(T::zero(), T::zero()), Cx::new(T::zero(), T::zero()));
        for a in 0..3 {
            let q = cd.map.node_to_periodic[tri[a]];
            gx = gx + coarse.grad_x[q] * lam[a];
            gy = gy + coarse.grad_y[q] * lam[a];
        }
        dx[p] = gx * rc - fine.grad_x[p] * rf;
        dy[p] = gy * rc - fine.grad_y[p] * rf;
    }
    // Exact P1 mass: ∫|Σ d_a φ_a|² = |T|/12 (Σ|d_a|² + |Σ d_a|²).
    let twelfth = T::one() / T::lit(12.0);
    let total: T = fmesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let p = tri.map(|g| fd.map.node_to_periodic[g]);
            let mut acc = T::zero();
            for d in [&dx, &dy] {
                let sq: T = p.iter().map(|&q| d[q].norm_sqr()).sum();
                let sum = d[p[0]] + d[p[1]] + d[p[2]];
                acc = acc + sq + sum.norm_sqr();
            }
            fmesh.area(t) * twelfth * acc
        })
        .sum();
    total.sqrt()
}

impl<T: Real> ConvergenceReport<T> {
    /// `pair,N_coarse,N_fine,band,err_fem,err_recovered,de_gradient`; bands
    /// are numbered from 1.
    pub fn write_errors<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "pair",
            "N_coarse",
            "N_fine",
            "band",
            "err_fem",
            "err_recovered",
            "de_gradient",
        ])
        .map_err(csv_err)?;
        for (i, p) in self.pairs.iter().enumerate() {
            for b in 0..p.err_fem.len() {
                w.write_record([
                    i.to_string(),
                    p.n_coarse.to_string(),
                    p.n_fine.to_string(),
                    (b + 1).to_string(),
                    p.err_fem[b].to_f64_lossy().to_string(),
                    p.err_recovered[b].to_f64_lossy().to_string(),
                    p.de_gradient[b].to_f64_lossy().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `band,quantity,slope`.
    pub fn write_slopes<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["band", "quantity", "slope"]).map_err(csv_err)?;
        for (b, s) in self.slopes.iter().enumerate() {
            for (name, v) in [
                ("err_fem", s.err_fem),
                ("err_recovered", s.err_recovered),
                ("de_gradient", s.de_gradient),
            ] {
                w.write_record([(b + 1).to_string(), name.to_string(), v.to_f64_lossy().to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
