//! The k∥ sweep: per-k eigensolve, recovered eigenvalues, localization and
//! edge-mode classification.

use rayon::prelude::*;

use crate::assembly::{assemble, bloch_stiffness, triangle_quadrature, MatrixSet, DEFAULT_QUAD_ORDER};
use crate::eigensolver::{solve_gevp, EigenResult, SolverOptions};
use crate::error::Result;
use crate::lattice::Vec2;
use crate::material::{DomainWallSpec, HermMat2};
use crate::mesh::{build_dof_map, build_patches, p1_gradients, CylinderMesh, Diagonal, DofMap, NodeClass};
use crate::recovery::{build_recovery, recover_gradient, RecoveryOperator};
use crate::scalar::{czero, Cx, Real};

/// Material weight cached at the quadrature points of every triangle.
#[derive(Debug, Clone)]
pub struct WeightCache<T> {
    pub order: usize,
    /// Barycentric points of the rule.
    pub bary: Vec<[T; 3]>,
    /// Per triangle, per point: `weight · |T|` and `W`.
    pub values: Vec<Vec<(T, HermMat2<T>)>>,
}

impl<T: Real> WeightCache<T> {
    pub fn new(mesh: &CylinderMesh<T>, spec: &DomainWallSpec<T>, order: usize) -> Result<Self> {
        let rule = triangle_quadrature::<T>(order)?;
        let values = (0..mesh.triangles.len())
            .into_par_iter()
            .map(|t| {
                let v = mesh.vertices(t);
                let area = mesh.area(t);
                rule.iter()
                    .map(|q| {
                        let x = v[0] * q.bary[0] + v[1] * q.bary[1] + v[2] * q.bary[2];
                        (q.weight * area, spec.eval_weight(x))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            order,
            bary: rule.iter().map(|q| q.bary).collect(),
            values,
        })
    }
}

/// Everything built once per (material, mesh): matrices, recovery operator
/// and the cached weight.
#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub mesh: CylinderMesh<T>,
    pub map: DofMap,
    pub spec: DomainWallSpec<T>,
    pub matrices: MatrixSet<T>,
    pub recovery: RecoveryOperator<T>,
    pub weights: WeightCache<T>,
    /// Lumped P1 mass per periodic node.
    pub lumped_mass: Vec<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(spec: DomainWallSpec<T>, n: usize, l: usize, diagonal: Diagonal, quad_order: usize) -> Result<Self> {
        let mesh = CylinderMesh::new(n, l, diagonal)?;
        let map = build_dof_map(&mesh);
        let matrices = assemble(&mesh, &map, &spec, quad_order)?;
        let patches = build_patches(&mesh, &map)?;
        let recovery = build_recovery(&mesh, &map, patches)?;
        let weights = WeightCache::new(&mesh, &spec, quad_order)?;
        let mut lumped_mass = vec![T::zero(); map.n_periodic];
        let third = T::one() / T::lit(3.0);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = mesh.area(t) * third;
            for &g in tri {
                let p = map.node_to_periodic[g];
                lumped_mass[p] = lumped_mass[p] + a;
            }
        }
        Ok(Self {
            mesh,
            map,
            spec,
            matrices,
            recovery,
            weights,
            lumped_mass,
        })
    }

    pub fn with_defaults(spec: DomainWallSpec<T>, n: usize, l: usize) -> Result<Self> {
        Self::new(spec, n, l, Diagonal::Regular, DEFAULT_QUAD_ORDER)
    }

    /// Solves the pencil at one `k∥`.
    pub fn solve(&self, k_par: T, n_bands: usize, opts: &SolverOptions<T>) -> Result<EigenResult<T>> {
        let s = bloch_stiffness(&self.matrices, k_par);
        solve_gevp(&s.s, &self.matrices.m_mass, n_bands, opts)
    }

    /// Builds the [`ModeField`] of a dof vector (normalized to `‖p‖_M = 1`).
    pub fn mode_field(&self, k_par: T, band: usize, eigenvalue: T, v: &[Cx<T>]) -> Result<ModeField<T>> {
        let norm = crate::linalg::dense::dot(v, &self.matrices.m_mass.mul_vec(v)).re.sqrt();
        let inv = T::one() / norm;
        let dofs: Vec<Cx<T>> = v.iter().map(|z| *z * inv).collect();
        let nodal = self.map.extend(&dofs);
        let (grad_x, grad_y) = recover_gradient(&self.recovery, &nodal)?;
        let correction = correction_norm(&self.mesh, &self.map, &self.weights, &nodal, (&grad_x, &grad_y));
        let (center_fraction, boundary_fraction) =
            localization_profile(&self.mesh, &self.map, &self.lumped_mass, &nodal);
        Ok(ModeField {
            k_par,
            band,
            eigenvalue,
            recovered_eigenvalue: recovered_eigenvalue(eigenvalue, correction),
            correction,
            center_fraction,
            boundary_fraction,
            dofs,
            nodal,
            grad_x,
            grad_y,
        })
    }
}

/// One eigenfunction with its derived quantities. Vectors other than
/// `dofs` live on the periodic index space.
#[derive(Debug, Clone)]
pub struct ModeField<T> {
    pub k_par: T,
    /// Zero-based band index.
    pub band: usize,
    pub eigenvalue: T,
    pub recovered_eigenvalue: T,
    pub correction: T,
    pub center_fraction: T,
    pub boundary_fraction: T,
    pub dofs: Vec<Cx<T>>,
    pub nodal: Vec<Cx<T>>,
    pub grad_x: Vec<Cx<T>>,
    pub grad_y: Vec<Cx<T>>,
}

impl<T: Real> ModeField<T> {
    /// `(τ1, τ2, |p|)` at every geometric node in mesh order.
    pub fn modulus_grid(&self, mesh: &CylinderMesh<T>, map: &DofMap) -> Vec<(T, T, T)> {
        mesh.nodes
            .iter()
            .enumerate()
            .map(|(g, nd)| (nd.tau1, nd.tau2, self.nodal[map.node_to_periodic[g]].norm()))
            .collect()
    }

    /// Multiplies the field by a unit phase.
    pub fn rotate_phase(&mut self, phase: Cx<T>) {
        for v in [&mut self.dofs, &mut self.nodal, &mut self.grad_x, &mut self.grad_y] {
            for z in v.iter_mut() {
                *z = *z * phase;
            }
        }
    }
}

/// `∫ eᴴ W e` with `e = ∇p_h − G_h p_h`: the element gradient of the P1
/// field minus the linear interpolant of the recovered nodal gradients.
pub fn correction_norm<T: Real>(
    mesh: &CylinderMesh<T>,
    map: &DofMap,
    weights: &WeightCache<T>,
    u: &[Cx<T>],
    grad: (&[Cx<T>], &[Cx<T>]),
) -> T {
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let p = tri.map(|g| map.node_to_periodic[g]);
            let gphi = p1_gradients(mesh.vertices(t));
            let mut gh = [czero::<T>(); 2];
            for a in 0..3 {
                gh[0] = gh[0] + u[p[a]] * gphi[a].x;
                gh[1] = gh[1] + u[p[a]] * gphi[a].y;
            }
            let mut acc = T::zero();
            for (bary, (w, mat)) in weights.bary.iter().zip(&weights.values[t]) {
                let mut e = gh;
                for a in 0..3 {
                    e[0] = e[0] - grad.0[p[a]] * bary[a];
                    e[1] = e[1] - grad.1[p[a]] * bary[a];
                }
                acc = acc + mat.form(e, e).re * *w;
            }
            acc
        })
        .sum()
}

/// `Ê = E − corr`.
pub fn recovered_eigenvalue<T: Real>(e_fem: T, corr: T) -> T {
    e_fem - corr
}

/// Lumped-mass fractions of `|p|²` with `|τ2| < L/3` and `|τ2| > 2L/3`.
pub fn localization_profile<T: Real>(mesh: &CylinderMesh<T>, map: &DofMap, lumped: &[T], u: &[Cx<T>]) -> (T, T) {
    let l = T::from_usize_lossy(mesh.l());
    let (lo, hi) = (l / T::lit(3.0), l * T::lit(2.0) / T::lit(3.0));
    let mut total = T::zero();
    let mut center = T::zero();
    let mut boundary = T::zero();
    for p in 0..map.n_periodic {
        let tau2 = mesh.nodes[map.periodic_to_node[p]].tau2.abs();
        let w = lumped[p] * u[p].norm_sqr();
        total = total + w;
        if tau2 < lo {
            center = center + w;
        } else if tau2 > hi {
            boundary = boundary + w;
        }
    }
    if total > T::zero() {
        (center / total, boundary / total)
    } else {
        (T::zero(), T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandClass {
    Bulk,
    Edge,
    PseudoEdge,
    Unclassified,
}

impl BandClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BandClass::Bulk => "bulk",
            BandClass::Edge => "edge",
            BandClass::PseudoEdge => "pseudo_edge",
            BandClass::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub center: T,
    pub boundary: T,
    pub gap: T,
    /// Half-width of the k window around the probe used for isolation.
    pub window: T,
}

impl<T: Real> Default for Thresholds<T> {
    fn default() -> Self {
        Self {
            center: T::lit(0.8),
            boundary: T::lit(0.8),
            gap: T::lit(0.5),
            window: T::PI() / T::lit(8.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint<T> {
    pub e_fem: T,
    pub e_recovered: T,
    pub center_fraction: T,
    pub boundary_fraction: T,
}

impl<T: Real> BandPoint<T> {
    fn missing() -> Self {
        let nan = T::nan();
        Self {
            e_fem: nan,
            e_recovered: nan,
            center_fraction: nan,
            boundary_fraction: nan,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandStructure<T> {
    pub k_grid: Vec<T>,
    /// Position of each entry of `k_grid` in the full `linspace(0, 2π, K)`.
    pub k_index: Vec<usize>,
    /// `points[k][band]`, bands in ascending FEM order.
    pub points: Vec<Vec<BandPoint<T>>>,
    /// `k` indices whose solve failed, with the error text; their points are NaN.
    pub failures: Vec<(usize, String)>,
}

impl<T: Real> BandStructure<T> {
    pub fn n_bands(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

/// Solution at one probe momentum.
#[derive(Debug, Clone)]
pub struct ProbeSolution<T> {
    pub k_par: T,
    pub fields: Vec<ModeField<T>>,
}

impl<T: Real> ProbeSolution<T> {
    pub fn points(&self) -> Vec<BandPoint<T>> {
        self.fields
            .iter()
            .map(|f| BandPoint {
                e_fem: f.eigenvalue,
                e_recovered: f.recovered_eigenvalue,
                center_fraction: f.center_fraction,
                boundary_fraction: f.boundary_fraction,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandLabel<T> {
    pub class: BandClass,
    pub isolated: bool,
    /// Smallest gap to the neighboring bands (clusters count as one band)
    /// over the window, in units of the median band spacing.
    pub gap_ratio: T,
}

/// Labels every band from the sweep and the fields at the probe momentum.
///
/// Consecutive localized bands (center or boundary, in any mix) form one
/// cluster, and isolation is measured between the cluster and the
/// delocalized bands around it. Curves inside a cluster may cross each
/// other within the window without affecting the result.
pub fn classify_bands<T: Real>(
    bands: &BandStructure<T>,
    probe: &ProbeSolution<T>,
    th: &Thresholds<T>,
) -> Vec<BandLabel<T>> {
    let m = probe.fields.len().min(bands.n_bands());
    let local: Vec<Vec<T>> = bands
        .k_grid
        .iter()
        .zip(&bands.points)
        .filter(|(k, _)| (**k - probe.k_par).abs() <= th.window)
        .map(|(_, pts)| pts.iter().map(|p| p.e_fem).collect::<Vec<T>>())
        .chain(std::iter::once(probe.fields.iter().map(|f| f.eigenvalue).collect()))
        .filter(|row: &Vec<T>| row.len() >= m && row.iter().all(|e| e.is_finite()))
        .collect();
    if local.is_empty() || m == 0 {
        return vec![
            BandLabel {
                class: BandClass::Unclassified,
                isolated: false,
                gap_ratio: T::nan(),
            };
            m
        ];
    }
    let mut spacings: Vec<T> = local
        .iter()
        .flat_map(|row| row[..m].windows(2).map(|w| w[1] - w[0]))
        .collect();
    spacings.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = spacings.get(spacings.len() / 2).copied().unwrap_or(T::zero());

    #[derive(PartialEq, Clone, Copy)]
    enum Loc {
        Center,
        Boundary,
        Neither,
    }
    let loc: Vec<Loc> = probe.fields[..m]
        .iter()
        .map(|f| {
            if f.center_fraction > th.center {
                Loc::Center
            } else if f.boundary_fraction > th.boundary {
                Loc::Boundary
            } else {
                Loc::Neither
            }
        })
        .collect();

    let mut labels = Vec::with_capacity(m);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        if loc[start] != Loc::Neither {
            while end < m && loc[end] != Loc::Neither {
                end += 1;
            }
        }
        // Cluster [start, end): gap below its lowest and above its highest
        // member. The top band only has a lower neighbor.
        let mut min_gap = T::infinity();
        for row in &local {
            if start > 0 {
                min_gap = min_gap.min(row[start] - row[start - 1]);
            }
            if end < m {
                min_gap = min_gap.min(row[end] - row[end - 1]);
            }
        }
        let ratio = if median > T::zero() {
            min_gap / median
        } else {
            T::infinity()
        };
        let isolated = ratio > th.gap;
        for &l in &loc[start..end] {
            let class = match (isolated, l) {
                (true, Loc::Center) => BandClass::Edge,
                (true, Loc::Boundary) => BandClass::PseudoEdge,
                (false, Loc::Center) | (false, Loc::Boundary) => BandClass::Unclassified,
                _ => BandClass::Bulk,
            };
            labels.push(BandLabel {
                class,
                isolated,
                gap_ratio: ratio,
            });
        }
        start = end;
    }
    labels
}

#[derive(Debug, Clone)]
pub struct SweepConfig<T> {
    /// Number of `k∥` samples in `linspace(0, 2π, K)`.
    pub k_count: usize,
    pub n_bands: usize,
    /// Probe momenta; the first one drives the classification.
    pub probes: Vec<T>,
    pub thresholds: Thresholds<T>,
    pub solver: SolverOptions<T>,
    /// Solve only the grid points inside the classification window of some
    /// probe. Labels are unchanged; the band table is partial.
    pub window_only: bool,
}

impl<T: Real> SweepConfig<T> {
    pub fn new(k_count: usize, n_bands: usize) -> Self {
        let two_pi_3 = T::lit(2.0) * T::PI() / T::lit(3.0);
        Self {
            k_count,
            n_bands,
            probes: vec![two_pi_3, two_pi_3 * T::lit(2.0)],
            thresholds: Thresholds::default(),
            solver: SolverOptions::default(),
            window_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult<T> {
    pub bands: BandStructure<T>,
    pub probes: Vec<ProbeSolution<T>>,
    /// Labels from the first probe (empty when no probe was requested).
    pub labels: Vec<BandLabel<T>>,
}

/// `linspace(0, 2π, K)`.
pub fn k_grid<T: Real>(k_count: usize) -> Vec<T> {
    let two_pi = T::lit(2.0) * T::PI();
    if k_count == 1 {
        return vec![T::zero()];
    }
    (0..k_count)
        .map(|i| two_pi * T::from_usize_lossy(i) / T::from_usize_lossy(k_count - 1))
        .collect()
}

fn solve_fields<T: Real>(disc: &Discretization<T>, k: T, cfg: &SweepConfig<T>) -> Result<Vec<ModeField<T>>> {
    let r = disc.solve(k, cfg.n_bands, &cfg.solver)?;
    r.eigenvalues
        .iter()
        .zip(&r.eigenvectors)
        .enumerate()
        .map(|(b, (&e, v))| disc.mode_field(k, b, e, v))
        .collect()
}

/// Runs the whole sweep on a prepared discretization. Each `k∥` is solved
/// independently with the same seed, so the result does not depend on the
/// order in which the grid is visited.
pub fn sweep<T: Real>(disc: &Discretization<T>, cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    let full = k_grid::<T>(cfg.k_count);
    let k_index: Vec<usize> = (0..full.len())
        .filter(|&i| !cfg.window_only || cfg.probes.iter().any(|&p| (full[i] - p).abs() <= cfg.thresholds.window))
        .collect();
    let grid: Vec<T> = k_index.iter().map(|&i| full[i]).collect();
    let solved: Vec<std::result::Result<Vec<BandPoint<T>>, String>> = grid
        .par_iter()
        .map(|&k| {
            solve_fields(disc, k, cfg)
                .map(|fields| ProbeSolution { k_par: k, fields }.points())
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut failures = Vec::new();
    let points = solved
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(p) => p,
            Err(e) => {
                failures.push((k_index[i], e));
                vec![BandPoint::missing(); cfg.n_bands]
            }
        })
        .collect();
    let bands = BandStructure {
        k_grid: grid,
        k_index,
        points,
        failures,
    };
    let probes = cfg
        .probes
        .par_iter()
        .map(|&k| solve_fields(disc, k, cfg).map(|fields| ProbeSolution { k_par: k, fields }))
        .collect::<Result<Vec<_>>>()?;
    let labels = probes
        .first()
        .map(|p| classify_bands(&bands, p, &cfg.thresholds))
        .unwrap_or_default();
    Ok(SweepResult { bands, probes, labels })
}

/// Nodal field with every node's value from a closure (periodic indexing);
/// handy for tests and for sampling analytic fields.
pub fn sample_nodal<T: Real>(
    mesh: &CylinderMesh<T>,
    map: &DofMap,
    f: impl Fn(Vec2<T>, NodeClass) -> Cx<T>,
) -> Vec<Cx<T>> {
    (0..map.n_periodic)
        .map(|p| {
            let nd = &mesh.nodes[map.periodic_to_node[p]];
            f(nd.x, nd.class)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{BulkSpec, PerturbationSpec};
    use crate::scalar::cx;

    fn unit_disc(n: usize, l: usize) -> Discretization<f64> {
        let spec = DomainWallSpec::new(BulkSpec::isotropic(1.0, 0.0), PerturbationSpec::PBreaking, 0.0, 1.0).unwrap();
        Discretization::with_defaults(spec, n, l).unwrap()
    }

    #[test]
    fn recovered_eigenvalue_examples() {
        assert_eq!(recovered_eigenvalue(5.0, 0.0), 5.0);
        assert!(recovered_eigenvalue(5.0, 0.1) < 5.0);
    }

    #[test]
    fn zero_error_gives_zero_correction() {
        let d = unit_disc(8, 1);
        let u = vec![czero(); d.map.n_periodic];
        assert_eq!(correction_norm(&d.mesh, &d.map, &d.weights, &u, (&u, &u)), 0.0);
    }

    #[test]
    fn linear_field_has_no_correction_on_clean_patches() {
        // u = 3x − 2y sampled on the whole (non-periodic) strip: recovered
        // gradient is exact wherever the patch does not wrap.
        let d = unit_disc(8, 1);
        let u = sample_nodal(&d.mesh, &d.map, |x, _| cx(3.0 * x.x - 2.0 * x.y, 0.0));
        let gx = vec![cx(3.0, 0.0); d.map.n_periodic];
        let gy = vec![cx(-2.0, 0.0); d.map.n_periodic];
        let mut total = 0.0;
        for (t, tri) in d.mesh.triangles.iter().enumerate() {
            if tri.iter().any(|&g| d.mesh.nodes[g].i == d.mesh.n()) {
                continue;
            }
            let mut w = d.weights.clone();
            w.values = vec![Vec::new(); d.mesh.triangles.len()];
            w.values[t] = d.weights.values[t].clone();
            total += correction_norm(&d.mesh, &d.map, &w, &u, (&gx, &gy));
        }
        assert!(total < 1e-24, "{total}");
    }

    #[test]
    fn localization_examples() {
        let d = unit_disc(8, 3);
        let ones = vec![cx(1.0, 0.0); d.map.n_periodic];
        let (c, b) = localization_profile(&d.mesh, &d.map, &d.lumped_mass, &ones);
        assert!((c - 1.0 / 3.0).abs() < 0.03 && (b - 1.0 / 3.0).abs() < 0.03, "{c} {b}");
        let inner = sample_nodal(&d.mesh, &d.map, |x, _| {
            let (_, t2) = d.mesh.basis().to_lattice_coords(x);
            if t2.abs() < 0.9 {
                cx(1.0, 0.0)
            } else {
                czero()
            }
        });
        let (c, b) = localization_profile(&d.mesh, &d.map, &d.lumped_mass, &inner);
        assert!((c - 1.0).abs() < 1e-14 && b == 0.0);
    }

    #[test]
    fn k_grid_endpoints() {
        let g = k_grid::<f64>(33);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert!((g[32] - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }
}
